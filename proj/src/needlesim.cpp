#include "vpanel/needlesim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "vpanel/error.hpp"
#include "vpanel/panelizer.hpp"
#include "vpanel/png_io.hpp"

namespace vpanel {

namespace fs = std::filesystem;
using nlohmann::json;

void NeedleSpec::validate() const {
  if (haystack_frames < 1) throw Error(ErrorKind::InvalidSpec, "haystack needs at least one frame");
  if (!(fps > 0.0)) throw Error(ErrorKind::InvalidSpec, "fps must be positive");
  if (width < 1 || height < 1) throw Error(ErrorKind::InvalidSpec, "frame size must be positive");
  if (distractors.empty()) throw Error(ErrorKind::InvalidSpec, "no distractor colours");
  if (std::find(distractors.begin(), distractors.end(), needle_color) != distractors.end()) {
    throw Error(ErrorKind::InvalidSpec, "needle colour is also a distractor colour");
  }
  if (needle_color == Rgb{0, 0, 0}) {
    throw Error(ErrorKind::InvalidSpec, "black is reserved for padding tiles");
  }
  for (const NeedleSpan& n : needles) {
    if (n.start < 0 || n.length < 1 || n.start + n.length > haystack_frames) {
      throw Error(ErrorKind::InvalidSpec,
                  fmt::format("needle span ({}, {}) outside [0, {})", n.start, n.length,
                              haystack_frames));
    }
  }
}

NeedleVideo::NeedleVideo(NeedleSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(spec_.seed);
  std::uniform_int_distribution<std::size_t> pick(0, spec_.distractors.size() - 1);
  palette_index_.resize(static_cast<std::size_t>(spec_.haystack_frames));
  for (auto& p : palette_index_) p = static_cast<std::uint8_t>(pick(rng));
}

VideoMeta NeedleVideo::meta() const {
  return VideoMeta::from_count(spec_.haystack_frames, spec_.fps, spec_.width, spec_.height);
}

bool NeedleVideo::is_needle(std::int64_t index) const {
  return std::any_of(spec_.needles.begin(), spec_.needles.end(), [&](const NeedleSpan& n) {
    return index >= n.start && index < n.start + n.length;
  });
}

Rgb NeedleVideo::color_at(std::int64_t index) const {
  if (is_needle(index)) return spec_.needle_color;
  return spec_.distractors[palette_index_[static_cast<std::size_t>(index)]];
}

Image NeedleVideo::frame(std::int64_t index) const {
  return Image(spec_.width, spec_.height, color_at(index));
}

std::unique_ptr<GeneratedSource> NeedleVideo::source(std::string uri) const {
  return std::make_unique<GeneratedSource>(std::move(uri), meta(),
                                           [this](std::int64_t i) { return frame(i); });
}

std::unique_ptr<FrameSource> generate_video(const NeedleSpec& spec, const fs::path& dir) {
  const NeedleVideo video(spec);
  fs::create_directories(dir);
  for (std::int64_t i = 0; i < spec.haystack_frames; ++i) {
    png::write_file(dir / fmt::format("frame_{:06d}.png", i), video.frame(i));
  }
  std::ofstream meta(dir / "meta.json", std::ios::trunc);
  meta << json{{"fps", spec.fps}, {"width", spec.width}, {"height", spec.height}}.dump() << '\n';
  meta.close();
  return open_source(dir.string());
}

std::string color_label(Rgb c) { return fmt::format("rgb({}, {}, {})", c.r, c.g, c.b); }

Rgb parse_color(std::string_view text) {
  int v[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v[k]);
    if (ec != std::errc() || v[k] < 0 || v[k] > 255) {
      throw Error(ErrorKind::InvalidSpec, "colour must be 'R,G,B' with 0-255 components");
    }
    pos = static_cast<std::size_t>(ptr - text.data());
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (k < 2) {
      if (pos >= text.size() || text[pos] != ',') {
        throw Error(ErrorKind::InvalidSpec, "colour must be 'R,G,B' with 0-255 components");
      }
      ++pos;
    }
  }
  if (pos != text.size()) throw Error(ErrorKind::InvalidSpec, "trailing characters in colour");
  return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
          static_cast<std::uint8_t>(v[2])};
}

QAItem needle_question(const NeedleSpec& spec, std::string item_id, std::string video_uri) {
  std::vector<Rgb> wrong;
  for (const Rgb& c : spec.distractors) {
    if (c != spec.needle_color && std::find(wrong.begin(), wrong.end(), c) == wrong.end()) {
      wrong.push_back(c);
    }
    if (wrong.size() == 3) break;
  }
  const std::size_t option_count = wrong.size() + 1;
  const std::size_t gold_pos = static_cast<std::size_t>(spec.seed % option_count);

  QAItem item;
  item.item_id = std::move(item_id);
  item.video_uri = std::move(video_uri);
  item.question = "Which colour fills the screen for a brief moment in this video?";
  item.duration_seconds = static_cast<double>(spec.haystack_frames) / spec.fps;
  std::size_t w = 0;
  for (std::size_t k = 0; k < option_count; ++k) {
    const Rgb c = k == gold_pos ? spec.needle_color : wrong[w++];
    item.options.push_back({static_cast<char>('A' + k), color_label(c)});
  }
  item.gold = static_cast<char>('A' + gold_pos);
  item.tags = {"needle"};
  return item;
}

char mock_vlm_answer(std::span<const Image> images, std::string_view prompt, Rgb needle_color) {
  const std::vector<AnswerOption> options = extract_options(prompt);
  if (options.empty()) return 'A';
  const std::string label = color_label(needle_color);
  const auto gold = std::find_if(options.begin(), options.end(),
                                 [&](const AnswerOption& o) { return o.text == label; });
  if (gold == options.end()) return options.front().letter;

  const bool seen = std::any_of(images.begin(), images.end(),
                                [&](const Image& img) { return img.contains_color(needle_color); });
  if (seen) return gold->letter;
  return gold == options.begin() ? options[1 % options.size()].letter : options.front().letter;
}

MockVlmServer::Responder needle_responder(Rgb needle_color) {
  return [needle_color](const ChatRequest& req) {
    std::vector<Image> images;
    images.reserve(req.images.size());
    for (const PngBytes& png : req.images) images.push_back(png::decode(png));
    return MockReply{200, std::string(1, mock_vlm_answer(images, req.text, needle_color))};
  };
}

double SimReport::standard_error_baseline() const {
  const double p = expectation_baseline;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<std::int64_t>(trials, 1)));
}

double SimReport::standard_error_panels() const {
  const double p = expectation_panels;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<std::int64_t>(trials, 1)));
}

json SimReport::to_json() const {
  return json{{"trials", trials},
              {"hits_baseline", hits_baseline},
              {"hits_panels", hits_panels},
              {"detection_rate_baseline", detection_rate_baseline},
              {"detection_rate_panels", detection_rate_panels},
              {"analytic_expectation_baseline", expectation_baseline},
              {"analytic_expectation_panels", expectation_panels},
              {"standard_error_baseline", standard_error_baseline()},
              {"standard_error_panels", standard_error_panels()},
              {"plan_baseline", plan_baseline},
              {"plan_panels", plan_panels},
              {"config", config}};
}

double detection_expectation(std::span<const std::int64_t> sampled, std::int64_t frame_count,
                             std::int64_t needle_length) {
  if (needle_length < 1 || needle_length > frame_count) {
    throw Error(ErrorKind::InvalidSpec, "needle length must be in [1, frame_count]");
  }
  // A start s detects sample i when s lies in [i - L + 1, i]; count the union
  // of these windows clipped to the valid starts [0, D - L].
  const std::int64_t last_start = frame_count - needle_length;
  std::int64_t covered = 0;
  std::int64_t frontier = -1;  // highest start already counted
  for (const std::int64_t i : sampled) {
    const std::int64_t lo = std::max<std::int64_t>({i - needle_length + 1, 0, frontier + 1});
    const std::int64_t hi = std::min(i, last_start);
    if (hi >= lo) {
      covered += hi - lo + 1;
      frontier = hi;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(last_start + 1);
}

json to_json(const SimConfig& c) {
  return json{{"duration_frames", c.duration_frames},
              {"fps", c.fps},
              {"width", c.width},
              {"height", c.height},
              {"needle_length", c.needle_length},
              {"needle_color", color_label(c.needle_color)},
              {"policy", c.policy},
              {"baseline_mode", to_string(c.baseline_mode)},
              {"candidate_mode", to_string(c.candidate_mode)},
              {"trials", c.trials},
              {"seed", c.seed}};
}

namespace {

bool run_arm(const NeedleVideo& video, const SamplePlan& plan, const QAItem& question,
             ModelClient& client) {
  auto source = video.source();
  const std::vector<Frame> frames = source->read_frames(plan.frame_indices);
  const PanelizedVideo panels = panelize_sequence(frames, plan);
  std::vector<PngBytes> images;
  images.reserve(panels.panels.size());
  for (const PanelImage& p : panels.panels) images.push_back(png::encode(p.image));
  const std::string prompt = render_prompt(question, PromptTemplate::standard());
  const std::string answer = client.complete(images, prompt);
  const auto letter = parse_choice(answer, question.option_letters(), question.options);
  return letter && *letter == question.gold;
}

}  // namespace

SimReport run_simulation(const SimConfig& config, ModelClient& client) {
  if (config.trials < 1) throw Error(ErrorKind::InvalidSpec, "trials must be >= 1");
  if (config.needle_length < 1 || config.needle_length > config.duration_frames) {
    throw Error(ErrorKind::InvalidSpec, "needle length must be in [1, duration_frames]");
  }
  const VideoMeta meta =
      VideoMeta::from_count(config.duration_frames, config.fps, config.width, config.height);

  SimReport report;
  report.trials = config.trials;
  report.config = to_json(config);
  report.plan_baseline = plan_sampling(config.policy, meta, config.baseline_mode);
  report.plan_panels = plan_sampling(config.policy, meta, config.candidate_mode);
  report.expectation_baseline = detection_expectation(report.plan_baseline.frame_indices,
                                                      config.duration_frames, config.needle_length);
  report.expectation_panels = detection_expectation(report.plan_panels.frame_indices,
                                                    config.duration_frames, config.needle_length);

  std::vector<std::uint8_t> hit_baseline(static_cast<std::size_t>(config.trials), 0);
  std::vector<std::uint8_t> hit_panels(static_cast<std::size_t>(config.trials), 0);
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      for (std::int64_t t = next++; t < config.trials; t = next++) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                          static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::int64_t> place(
            0, config.duration_frames - config.needle_length);

        NeedleSpec spec;
        spec.haystack_frames = config.duration_frames;
        spec.fps = config.fps;
        spec.width = config.width;
        spec.height = config.height;
        spec.needle_color = config.needle_color;
        spec.needles = {{place(rng), config.needle_length}};
        spec.seed = rng();
        spec.distractors.erase(
            std::remove(spec.distractors.begin(), spec.distractors.end(), spec.needle_color),
            spec.distractors.end());

        const NeedleVideo video(spec);
        const QAItem question = needle_question(spec, fmt::format("trial-{}", t), "needle://trial");
        const auto slot = static_cast<std::size_t>(t);
        hit_baseline[slot] = run_arm(video, report.plan_baseline, question, client) ? 1 : 0;
        hit_panels[slot] = run_arm(video, report.plan_panels, question, client) ? 1 : 0;
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = config.trials;
    }
  };

  const int threads = std::clamp<int>(config.parallelism, 1,
                                      static_cast<int>(std::min<std::int64_t>(config.trials, 256)));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t t = 0; t < hit_baseline.size(); ++t) {
    report.hits_baseline += hit_baseline[t];
    report.hits_panels += hit_panels[t];
  }
  const auto n = static_cast<double>(config.trials);
  report.detection_rate_baseline = static_cast<double>(report.hits_baseline) / n;
  report.detection_rate_panels = static_cast<double>(report.hits_panels) / n;
  return report;
}

}  // namespace vpanel
