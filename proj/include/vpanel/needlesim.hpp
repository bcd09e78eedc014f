#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vpanel/benchmark.hpp"
#include "vpanel/framesource.hpp"
#include "vpanel/harness.hpp"
#include "vpanel/image.hpp"
#include "vpanel/mock_server.hpp"
#include "vpanel/policy.hpp"

namespace vpanel {

struct NeedleSpan {
  std::int64_t start = 0;
  std::int64_t length = 1;
};

/// A synthetic haystack: every frame is one solid colour. Needle frames use
/// needle_color, all others a distractor picked per frame from the seed.
struct NeedleSpec {
  std::int64_t haystack_frames = 640;
  double fps = 2.0;
  int width = 64;
  int height = 48;
  Rgb needle_color{255, 0, 255};
  std::vector<NeedleSpan> needles{{0, 1}};
  std::vector<Rgb> distractors{{32, 32, 32}, {0, 96, 160}, {40, 140, 60},
                               {200, 160, 40}, {120, 120, 120}, {20, 60, 110}};
  std::uint64_t seed = 0;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Frame colours for a spec, computed once.
class NeedleVideo {
 public:
  explicit NeedleVideo(NeedleSpec spec);

  const NeedleSpec& spec() const noexcept { return spec_; }
  VideoMeta meta() const;
  bool is_needle(std::int64_t index) const;
  Rgb color_at(std::int64_t index) const;
  Image frame(std::int64_t index) const;
  std::unique_ptr<GeneratedSource> source(std::string uri = "needle://generated") const;

 private:
  NeedleSpec spec_;
  std::vector<std::uint8_t> palette_index_;
};

/// Writes the haystack as frame_NNNNNN.png plus meta.json into dir and
/// returns it opened as an image-directory source.
std::unique_ptr<FrameSource> generate_video(const NeedleSpec& spec,
                                            const std::filesystem::path& dir);

/// Option text naming a colour, e.g. "rgb(255, 0, 255)".
std::string color_label(Rgb c);
Rgb parse_color(std::string_view text);  // "R,G,B"; throws InvalidSpec

/// Four-option colour question whose gold option is the needle colour; the
/// gold letter's position is derived from the spec's seed.
QAItem needle_question(const NeedleSpec& spec, std::string item_id, std::string video_uri);

/// The mock model: the gold letter (the option naming needle_color) when any
/// image holds at least one pixel of that colour, else the first other letter.
char mock_vlm_answer(std::span<const Image> images, std::string_view prompt, Rgb needle_color);

/// Responder for MockVlmServer wrapping mock_vlm_answer.
MockVlmServer::Responder needle_responder(Rgb needle_color);

struct SimConfig {
  std::int64_t duration_frames = 640;
  double fps = 2.0;
  int width = 64;
  int height = 48;
  std::int64_t needle_length = 1;
  Rgb needle_color{255, 0, 255};
  SamplingPolicy policy;                    // panel side
  PlanMode baseline_mode = PlanMode::Baseline;
  PlanMode candidate_mode = PlanMode::Auto;
  std::int64_t trials = 1000;
  std::uint64_t seed = 7;
  int parallelism = 1;
};

struct SimReport {
  std::int64_t trials = 0;
  std::int64_t hits_baseline = 0;
  std::int64_t hits_panels = 0;
  double detection_rate_baseline = 0.0;
  double detection_rate_panels = 0.0;
  double expectation_baseline = 0.0;
  double expectation_panels = 0.0;
  SamplePlan plan_baseline;
  SamplePlan plan_panels;
  nlohmann::json config;

  double standard_error_baseline() const;
  double standard_error_panels() const;
  nlohmann::json to_json() const;
};

/// Exact probability that a needle of the given length, placed uniformly over
/// all valid starts, overlaps at least one sampled index.
double detection_expectation(std::span<const std::int64_t> sampled, std::int64_t frame_count,
                             std::int64_t needle_length);

/// Places one needle uniformly at random per trial and runs both plans through
/// sampling, panel composition, prompt rendering, the model client and answer
/// parsing. Deterministic for a fixed seed regardless of parallelism.
SimReport run_simulation(const SimConfig& config, ModelClient& client);

nlohmann::json to_json(const SimConfig& config);

}  // namespace vpanel
