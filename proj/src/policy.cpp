#include "vpanel/policy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "vpanel/error.hpp"

namespace vpanel {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) != suffix[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace

GammaSpec GammaSpec::parse(std::string_view text) {
  const std::string_view s = trim(text);
  double value = 0.0;
  bool ok = false;
  Unit unit = Unit::Frames;
  if (ends_with_ci(s, "fps")) {
    unit = Unit::FpsMultiple;
    ok = parse_double(s.substr(0, s.size() - 3), value);
  } else if (ends_with_ci(s, "f")) {
    ok = parse_double(s.substr(0, s.size() - 1), value);
  } else {
    ok = parse_double(s, value);
  }
  if (!ok || !std::isfinite(value) || value < 0.0) {
    throw Error(ErrorKind::InvalidPolicy,
                "gamma must be '<non-negative float>fps' or '<non-negative float>f', got '" +
                    std::string(text) + "'");
  }
  return {unit, value};
}

std::string GammaSpec::to_string() const {
  return fmt::format("{}{}", value_, unit_ == Unit::FpsMultiple ? "fps" : "f");
}

void SamplingPolicy::validate() const {
  if (context_window < 1) {
    throw Error(ErrorKind::InvalidPolicy, "context_window must be >= 1");
  }
  if (alpha < 1 || beta < 1) {
    throw Error(ErrorKind::InvalidPolicy, "alpha and beta must be >= 1");
  }
  if (!std::isfinite(gamma.value()) || gamma.value() < 0.0) {
    throw Error(ErrorKind::InvalidPolicy, "gamma must be finite and non-negative");
  }
}

void VideoMeta::validate() const {
  if (frame_count < 0) throw Error(ErrorKind::SourceError, "negative frame_count");
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorKind::SourceError, "fps must be positive and finite");
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::SourceError, "width and height must be positive");
  }
  if (!std::isfinite(duration_seconds) || duration_seconds < 0.0) {
    throw Error(ErrorKind::SourceError, "duration_seconds must be finite and non-negative");
  }
  const double expected = static_cast<double>(frame_count) / fps;
  if (std::abs(duration_seconds - expected) > 1.0 / fps + 1e-9) {
    throw Error(ErrorKind::SourceError,
                fmt::format("duration {}s inconsistent with {} frames at {} fps",
                            duration_seconds, frame_count, fps));
  }
}

std::string_view to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::Auto: return "auto";
    case PlanMode::Baseline: return "baseline";
    case PlanMode::ForcePanels: return "force-panels";
    case PlanMode::LowResInput: return "lowres-input";
  }
  return "auto";
}

PlanMode parse_plan_mode(std::string_view text) {
  for (PlanMode m : {PlanMode::Auto, PlanMode::Baseline, PlanMode::ForcePanels,
                     PlanMode::LowResInput}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidPolicy, "unknown plan mode '" + std::string(text) + "'");
}

std::pair<int, int> parse_grid(std::string_view text) {
  const std::string_view s = trim(text);
  const auto x = s.find_first_of("xX");
  int rows = 0;
  int cols = 0;
  if (x == std::string_view::npos || !parse_int(s.substr(0, x), rows) ||
      !parse_int(s.substr(x + 1), cols) || rows < 1 || cols < 1) {
    throw Error(ErrorKind::InvalidPolicy,
                "grid must be 'RxC' with positive integers, got '" + std::string(text) + "'");
  }
  return {rows, cols};
}

std::string format_grid(int rows, int cols) { return fmt::format("{}x{}", rows, cols); }

double resolve_gamma(const SamplingPolicy& policy, const VideoMeta& meta) {
  if (!(meta.fps > 0.0)) throw Error(ErrorKind::InvalidPolicy, "fps must be positive");
  const double g = policy.gamma.unit() == GammaSpec::Unit::FpsMultiple
                       ? policy.gamma.value() * meta.fps
                       : policy.gamma.value();
  if (!std::isfinite(g) || g < 0.0) {
    throw Error(ErrorKind::InvalidPolicy,
                fmt::format("gamma {} resolves to non-finite or negative {}",
                            policy.gamma.to_string(), g));
  }
  return g;
}

std::vector<std::int64_t> uniform_indices(std::int64_t frame_count, std::int64_t n) {
  if (n < 1) throw Error(ErrorKind::InsufficientFrames, "n must be >= 1");
  if (n > frame_count) {
    throw Error(ErrorKind::InsufficientFrames,
                fmt::format("cannot sample {} distinct frames from {}", n, frame_count));
  }
  // floor((i + 0.5) * D / n) == floor((2i + 1) * D / 2n), exact in 128-bit.
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  const auto d = static_cast<unsigned __int128>(frame_count);
  const auto denom = static_cast<unsigned __int128>(n) * 2;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto num = static_cast<unsigned __int128>(2 * i + 1) * d;
    out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(num / denom);
  }
  return out;
}

SamplePlan plan_sampling(const SamplingPolicy& policy, const VideoMeta& meta, PlanMode mode) {
  policy.validate();
  if (meta.frame_count == 0) throw Error(ErrorKind::EmptyVideo, "video has no frames");
  meta.validate();

  const double gamma = resolve_gamma(policy, meta);
  const double c = static_cast<double>(policy.context_window);
  const bool long_video = !(gamma * c >= static_cast<double>(meta.frame_count));

  SamplePlan plan;
  plan.mode = mode;
  plan.panel_active = mode == PlanMode::ForcePanels || (mode == PlanMode::Auto && long_video);

  std::int64_t wanted = policy.context_window;
  if (plan.panel_active) {
    wanted = static_cast<std::int64_t>(policy.alpha) * policy.beta * policy.context_window;
    plan.grid_rows = policy.beta;
    plan.grid_cols = policy.alpha;
  }
  plan.frames_to_sample = std::min(wanted, meta.frame_count);

  if (plan.panel_active || (mode == PlanMode::LowResInput && long_video)) {
    const int cols = policy.alpha;
    const int rows = policy.beta;
    plan.tile_width = meta.width / cols;
    plan.tile_height = meta.height / rows;
    if (plan.tile_width < 1 || plan.tile_height < 1) {
      throw Error(ErrorKind::InvalidGeometry,
                  fmt::format("{}x{} frames too small for a {} grid", meta.width,
                              meta.height, format_grid(rows, cols)));
    }
  } else {
    plan.tile_width = meta.width;
    plan.tile_height = meta.height;
  }

  const std::int64_t per_panel = plan.tiles_per_panel();
  plan.panel_count = (plan.frames_to_sample + per_panel - 1) / per_panel;
  plan.pad_frames = plan.panel_count * per_panel - plan.frames_to_sample;
  plan.frame_indices = uniform_indices(meta.frame_count, plan.frames_to_sample);
  return plan;
}

}  // namespace vpanel
