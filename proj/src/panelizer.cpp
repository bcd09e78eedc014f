#include "vpanel/panelizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "vpanel/error.hpp"
#include "vpanel/png_io.hpp"
#include "vpanel/version.hpp"

namespace vpanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Tap {
  int lo = 0;
  int hi = 0;
  std::int64_t frac = 0;  // weight of `hi`, in units of 1/den
};

// Half-pixel-centred source taps for each destination coordinate, in exact
// rational form: s = ((2i + 1) * src - dst) / (2 * dst), clamped to the edges.
std::vector<Tap> taps(int src, int dst, std::int64_t& den) {
  den = 2 * static_cast<std::int64_t>(dst);
  std::vector<Tap> out(static_cast<std::size_t>(dst));
  const std::int64_t max_num = static_cast<std::int64_t>(src - 1) * den;
  for (int i = 0; i < dst; ++i) {
    std::int64_t num = (2 * static_cast<std::int64_t>(i) + 1) * src - dst;
    num = std::clamp<std::int64_t>(num, 0, max_num);
    const auto lo = static_cast<int>(num / den);
    out[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, src - 1), num % den};
  }
  return out;
}

// a + (b - a) * t with t = frac / den, scaled by den (exact).
std::int64_t lerp(std::int64_t a, std::int64_t b, std::int64_t frac, std::int64_t den) {
  return a * den + (b - a) * frac;
}

// num / den rounded half away from zero; inputs are non-negative.
std::uint8_t to_byte(std::int64_t num, std::int64_t den) {
  return static_cast<std::uint8_t>(std::min<std::int64_t>((2 * num + den) / (2 * den), 255));
}

}  // namespace

Image resize_bilinear(const Image& src, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidGeometry,
                fmt::format("target size {}x{} must be at least 1x1", width, height));
  }
  if (src.width() < 1 || src.height() < 1) {
    throw Error(ErrorKind::InvalidGeometry, "cannot resize an empty image");
  }
  if (width == src.width() && height == src.height()) return src;

  std::int64_t den_x = 1;
  std::int64_t den_y = 1;
  const auto xs = taps(src.width(), width, den_x);
  const auto ys = taps(src.height(), height, den_y);
  const auto in = src.pixels();
  const auto stride = static_cast<std::size_t>(src.width()) * 3;

  Image out(width, height);
  auto dst = out.pixels();
  std::size_t o = 0;
  for (const Tap& ty : ys) {
    const std::size_t row0 = static_cast<std::size_t>(ty.lo) * stride;
    const std::size_t row1 = static_cast<std::size_t>(ty.hi) * stride;
    for (const Tap& tx : xs) {
      const std::size_t c0 = static_cast<std::size_t>(tx.lo) * 3;
      const std::size_t c1 = static_cast<std::size_t>(tx.hi) * 3;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::int64_t top = lerp(in[row0 + c0 + ch], in[row0 + c1 + ch], tx.frac, den_x);
        const std::int64_t bottom = lerp(in[row1 + c0 + ch], in[row1 + c1 + ch], tx.frac, den_x);
        dst[o++] = to_byte(lerp(top, bottom, ty.frac, den_y), den_x * den_y);
      }
    }
  }
  return out;
}

Frame downsample_tile(const Frame& frame, int tile_width, int tile_height) {
  return {frame.index, frame.timestamp_seconds,
          resize_bilinear(frame.image, tile_width, tile_height)};
}

PanelImage compose_panel(std::span<const Frame> tiles, int grid_rows, int grid_cols) {
  if (grid_rows < 1 || grid_cols < 1) {
    throw Error(ErrorKind::InvalidGeometry, "grid must be at least 1x1");
  }
  const auto expected = static_cast<std::size_t>(grid_rows) * static_cast<std::size_t>(grid_cols);
  if (tiles.size() != expected) {
    throw Error(ErrorKind::InvalidGeometry,
                fmt::format("{} tiles for a {} grid", tiles.size(), format_grid(grid_rows, grid_cols)));
  }
  const int tw = tiles.front().width();
  const int th = tiles.front().height();
  for (const Frame& t : tiles) {
    if (t.width() != tw || t.height() != th) {
      throw Error(ErrorKind::InvalidGeometry,
                  fmt::format("tile {} is {}x{}, expected {}x{}", t.index, t.width(), t.height(),
                              tw, th));
    }
  }

  PanelImage panel;
  panel.grid_rows = grid_rows;
  panel.grid_cols = grid_cols;
  panel.image = Image(tw * grid_cols, th * grid_rows);
  auto dst = panel.image.pixels();
  const auto panel_stride = static_cast<std::size_t>(panel.image.width()) * 3;
  const auto tile_stride = static_cast<std::size_t>(tw) * 3;

  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const auto row = k / static_cast<std::size_t>(grid_cols);
    const auto col = k % static_cast<std::size_t>(grid_cols);
    const auto src = tiles[k].image.pixels();
    for (std::size_t y = 0; y < static_cast<std::size_t>(th); ++y) {
      const std::size_t dst_off =
          (row * static_cast<std::size_t>(th) + y) * panel_stride + col * tile_stride;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(y * tile_stride), tile_stride,
                  dst.begin() + static_cast<std::ptrdiff_t>(dst_off));
    }
    panel.source_indices.push_back(tiles[k].index);
    panel.source_timestamps.push_back(tiles[k].timestamp_seconds);
  }
  return panel;
}

std::vector<Image> slice_panel(const Image& panel, int grid_rows, int grid_cols) {
  if (grid_rows < 1 || grid_cols < 1 || panel.width() % grid_cols != 0 ||
      panel.height() % grid_rows != 0) {
    throw Error(ErrorKind::InvalidGeometry,
                fmt::format("{}x{} panel does not divide into a {} grid", panel.width(),
                            panel.height(), format_grid(grid_rows, grid_cols)));
  }
  const int tw = panel.width() / grid_cols;
  const int th = panel.height() / grid_rows;
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(grid_rows * grid_cols));
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) out.push_back(panel.crop(c * tw, r * th, tw, th));
  }
  return out;
}

PanelizedVideo panelize_sequence(std::span<const Frame> frames, const SamplePlan& plan) {
  if (static_cast<std::int64_t>(frames.size()) != plan.frames_to_sample ||
      plan.frame_indices.size() != frames.size()) {
    throw Error(ErrorKind::PlanViolation,
                fmt::format("{} frames supplied for a plan of {}", frames.size(),
                            plan.frames_to_sample));
  }
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].index != plan.frame_indices[k]) {
      throw Error(ErrorKind::PlanViolation,
                  fmt::format("frame {} at position {} but plan expects {}", frames[k].index, k,
                              plan.frame_indices[k]));
    }
  }

  PanelizedVideo out;
  out.manifest.plan = plan;
  out.manifest.toolkit_version = kToolkitVersion;
  const auto per_panel = static_cast<std::size_t>(plan.tiles_per_panel());
  const Frame padding{kPaddingIndex, -1.0, Image(plan.tile_width, plan.tile_height)};

  std::vector<Frame> chunk;
  chunk.reserve(per_panel);
  for (std::size_t start = 0; start < frames.size(); start += per_panel) {
    chunk.clear();
    const std::size_t stop = std::min(frames.size(), start + per_panel);
    for (std::size_t k = start; k < stop; ++k) {
      chunk.push_back(downsample_tile(frames[k], plan.tile_width, plan.tile_height));
    }
    while (chunk.size() < per_panel) chunk.push_back(padding);

    PanelImage panel = compose_panel(chunk, plan.grid_rows, plan.grid_cols);
    panel.panel_ordinal = static_cast<std::int64_t>(out.panels.size());
    out.manifest.panels.push_back(
        {"", panel.panel_ordinal, panel.source_indices, panel.source_timestamps});
    out.panels.push_back(std::move(panel));
  }
  if (static_cast<std::int64_t>(out.panels.size()) != plan.panel_count) {
    throw Error(ErrorKind::PlanViolation,
                fmt::format("composed {} panels, plan says {}", out.panels.size(),
                            plan.panel_count));
  }
  return out;
}

void Manifest::validate() const {
  std::vector<std::int64_t> flat;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PanelRecord& rec = panels[p];
    if (rec.panel_ordinal != static_cast<std::int64_t>(p)) {
      throw Error(ErrorKind::PlanViolation, "panel ordinals must be 0..n-1 in order");
    }
    if (rec.source_indices.size() != static_cast<std::size_t>(plan.tiles_per_panel()) ||
        rec.source_timestamps.size() != rec.source_indices.size()) {
      throw Error(ErrorKind::PlanViolation,
                  fmt::format("panel {} lists {} sources for a {} grid", p,
                              rec.source_indices.size(),
                              format_grid(plan.grid_rows, plan.grid_cols)));
    }
    for (const std::int64_t idx : rec.source_indices) {
      if (idx == kPaddingIndex) {
        if (p + 1 != panels.size()) {
          throw Error(ErrorKind::PlanViolation,
                      fmt::format("padding tile in panel {} which is not the last", p));
        }
      } else {
        flat.push_back(idx);
      }
    }
  }
  if (flat != plan.frame_indices) {
    throw Error(ErrorKind::PlanViolation,
                "panel provenance does not reproduce the plan's frame indices");
  }
}

Manifest panelize_video(FrameSource& source, const SamplingPolicy& policy, PlanMode mode,
                        const fs::path& out_dir, const json& config_echo) {
  const SamplePlan plan = plan_sampling(policy, source.meta(), mode);
  const std::vector<Frame> frames = source.read_frames(plan.frame_indices);
  PanelizedVideo result = panelize_sequence(frames, plan);

  fs::create_directories(out_dir);
  Manifest& manifest = result.manifest;
  manifest.video_uri = source.uri();
  manifest.video = source.meta();
  manifest.policy = policy;
  manifest.config = config_echo;
  for (std::size_t p = 0; p < result.panels.size(); ++p) {
    const std::string name = fmt::format("panel_{:05d}.png", p);
    png::write_file(out_dir / name, result.panels[p].image);
    manifest.panels[p].output_path = name;
  }
  manifest.validate();
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  out << json(manifest).dump(2) << '\n';
  if (!out) throw Error(ErrorKind::SourceError, "cannot write " + path.string());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::PlanViolation, "cannot open manifest " + path.string());
  try {
    return json::parse(in).get<Manifest>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::PlanViolation, path.string() + ": " + e.what());
  }
}

// --- JSON ------------------------------------------------------------------

void to_json(json& j, const GammaSpec& g) { j = g.to_string(); }
void from_json(const json& j, GammaSpec& g) { g = GammaSpec::parse(j.get<std::string>()); }

void to_json(json& j, const SamplingPolicy& p) {
  j = json{{"context_window", p.context_window},
           {"alpha", p.alpha},
           {"beta", p.beta},
           {"gamma", p.gamma}};
}

void from_json(const json& j, SamplingPolicy& p) {
  p.context_window = j.at("context_window").get<int>();
  p.alpha = j.at("alpha").get<int>();
  p.beta = j.at("beta").get<int>();
  p.gamma = j.at("gamma").get<GammaSpec>();
}

void to_json(json& j, const VideoMeta& m) {
  j = json{{"frame_count", m.frame_count},
           {"fps", m.fps},
           {"width", m.width},
           {"height", m.height},
           {"duration_seconds", m.duration_seconds}};
}

void from_json(const json& j, VideoMeta& m) {
  m.frame_count = j.at("frame_count").get<std::int64_t>();
  m.fps = j.at("fps").get<double>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.duration_seconds = j.at("duration_seconds").get<double>();
}

void to_json(json& j, const SamplePlan& p) {
  j = json{{"mode", to_string(p.mode)},
           {"panel_active", p.panel_active},
           {"frames_to_sample", p.frames_to_sample},
           {"frame_indices", p.frame_indices},
           {"grid_rows", p.grid_rows},
           {"grid_cols", p.grid_cols},
           {"tile_width", p.tile_width},
           {"tile_height", p.tile_height},
           {"panel_count", p.panel_count},
           {"pad_frames", p.pad_frames}};
}

void from_json(const json& j, SamplePlan& p) {
  p.mode = parse_plan_mode(j.value("mode", std::string("auto")));
  p.panel_active = j.at("panel_active").get<bool>();
  p.frames_to_sample = j.at("frames_to_sample").get<std::int64_t>();
  p.frame_indices = j.at("frame_indices").get<std::vector<std::int64_t>>();
  p.grid_rows = j.at("grid_rows").get<int>();
  p.grid_cols = j.at("grid_cols").get<int>();
  p.tile_width = j.at("tile_width").get<int>();
  p.tile_height = j.at("tile_height").get<int>();
  p.panel_count = j.at("panel_count").get<std::int64_t>();
  p.pad_frames = j.at("pad_frames").get<std::int64_t>();
}

void to_json(json& j, const PanelRecord& r) {
  j = json{{"output_path", r.output_path},
           {"panel_ordinal", r.panel_ordinal},
           {"source_indices", r.source_indices},
           {"source_timestamps", r.source_timestamps}};
}

void from_json(const json& j, PanelRecord& r) {
  r.output_path = j.at("output_path").get<std::string>();
  r.panel_ordinal = j.at("panel_ordinal").get<std::int64_t>();
  r.source_indices = j.at("source_indices").get<std::vector<std::int64_t>>();
  r.source_timestamps = j.at("source_timestamps").get<std::vector<double>>();
}

void to_json(json& j, const Manifest& m) {
  j = json{{"schema", kManifestSchema},
           {"toolkit_version", m.toolkit_version},
           {"video_uri", m.video_uri},
           {"video", m.video},
           {"policy", m.policy},
           {"plan", m.plan},
           {"panels", m.panels},
           {"config", m.config.is_null() ? json::object() : m.config}};
}

void from_json(const json& j, Manifest& m) {
  const std::string schema = j.value("schema", std::string(kManifestSchema));
  if (schema != kManifestSchema) {
    throw Error(ErrorKind::PlanViolation, fmt::format("unsupported manifest schema '{}'", schema));
  }
  m.toolkit_version = j.value("toolkit_version", std::string());
  m.video_uri = j.at("video_uri").get<std::string>();
  m.video = j.at("video").get<VideoMeta>();
  m.policy = j.at("policy").get<SamplingPolicy>();
  m.plan = j.at("plan").get<SamplePlan>();
  m.panels = j.at("panels").get<std::vector<PanelRecord>>();
  m.config = j.value("config", json::object());
}

}  // namespace vpanel
