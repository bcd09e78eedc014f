#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vpanel {

/// Minimum spacing between sampled frames below which paneling stays off.
/// Either an absolute frame count or a multiple of the video's frame rate.
class GammaSpec {
 public:
  enum class Unit { Frames, FpsMultiple };

  GammaSpec() = default;

  static GammaSpec frames(double value) { return {Unit::Frames, value}; }
  static GammaSpec fps_multiple(double value) { return {Unit::FpsMultiple, value}; }

  /// Accepts "<float>fps" (multiple of fps) or "<float>f" / "<float>" (frames).
  static GammaSpec parse(std::string_view text);

  Unit unit() const noexcept { return unit_; }
  double value() const noexcept { return value_; }

  /// Inverse of parse(); round-trips exactly.
  std::string to_string() const;

  friend bool operator==(const GammaSpec&, const GammaSpec&) = default;

 private:
  GammaSpec(Unit unit, double value) : unit_(unit), value_(value) {}

  Unit unit_ = Unit::FpsMultiple;
  double value_ = 1.0;
};

struct SamplingPolicy {
  int context_window = 32;
  int alpha = 2;  // panels per row (horizontal)
  int beta = 2;   // panels per column (vertical)
  GammaSpec gamma = GammaSpec::fps_multiple(1.0);

  /// Throws InvalidPolicy.
  void validate() const;

  friend bool operator==(const SamplingPolicy&, const SamplingPolicy&) = default;
};

struct VideoMeta {
  std::int64_t frame_count = 0;
  double fps = 1.0;
  int width = 0;
  int height = 0;
  double duration_seconds = 0.0;

  static VideoMeta from_count(std::int64_t frame_count, double fps, int width,
                              int height) {
    return {frame_count, fps, width, height,
            static_cast<double>(frame_count) / fps};
  }

  /// Throws SourceError when fields are out of range or the duration
  /// disagrees with frame_count / fps by more than one frame period.
  void validate() const;

  friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

enum class PlanMode {
  Auto,          // dynamic rule: panels only when gamma * C < frame_count
  Baseline,      // panels forced off, T = C
  ForcePanels,   // panels forced on regardless of gamma
  LowResInput,   // no panels, but frames shrunk to panel-tile size when the
                 // dynamic rule would have paneled
};

std::string_view to_string(PlanMode mode);
PlanMode parse_plan_mode(std::string_view text);

struct SamplePlan {
  PlanMode mode = PlanMode::Auto;
  bool panel_active = false;
  std::int64_t frames_to_sample = 0;
  std::vector<std::int64_t> frame_indices;
  int grid_rows = 1;
  int grid_cols = 1;
  int tile_width = 0;
  int tile_height = 0;
  std::int64_t panel_count = 0;
  std::int64_t pad_frames = 0;

  int tiles_per_panel() const noexcept { return grid_rows * grid_cols; }
  int panel_width() const noexcept { return grid_cols * tile_width; }
  int panel_height() const noexcept { return grid_rows * tile_height; }

  friend bool operator==(const SamplePlan&, const SamplePlan&) = default;
};

/// Parses "RxC" (rows x cols), e.g. "2x2" or "1x2".
std::pair<int, int> parse_grid(std::string_view text);
std::string format_grid(int rows, int cols);

/// gamma resolved to frames for this video. Throws InvalidPolicy when the
/// result is negative or not finite.
double resolve_gamma(const SamplingPolicy& policy, const VideoMeta& meta);

/// Uniform center-of-bin sampler: indices[i] = floor((i + 0.5) * frame_count / n).
/// Throws InsufficientFrames when n > frame_count.
std::vector<std::int64_t> uniform_indices(std::int64_t frame_count, std::int64_t n);

/// Decides T, the sampled indices and the panel geometry for one video.
/// In Auto mode T = C when gamma * C >= frame_count, otherwise alpha * beta * C
/// clamped to frame_count. Throws EmptyVideo, InvalidPolicy, InvalidGeometry.
SamplePlan plan_sampling(const SamplingPolicy& policy, const VideoMeta& meta,
                         PlanMode mode = PlanMode::Auto);

}  // namespace vpanel
