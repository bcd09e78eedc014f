#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vpanel/framesource.hpp"
#include "vpanel/image.hpp"
#include "vpanel/policy.hpp"

namespace vpanel {

inline constexpr std::int64_t kPaddingIndex = -1;

/// One composed grid image with the frames it came from, in reading order.
struct PanelImage {
  Image image;
  int grid_rows = 1;
  int grid_cols = 1;
  std::vector<std::int64_t> source_indices;    // kPaddingIndex for padding tiles
  std::vector<double> source_timestamps;       // -1.0 for padding tiles
  std::int64_t panel_ordinal = 0;

  friend bool operator==(const PanelImage&, const PanelImage&) = default;
};

struct PanelRecord {
  std::string output_path;  // relative to the manifest's directory
  std::int64_t panel_ordinal = 0;
  std::vector<std::int64_t> source_indices;
  std::vector<double> source_timestamps;

  friend bool operator==(const PanelRecord&, const PanelRecord&) = default;
};

struct Manifest {
  std::string video_uri;
  VideoMeta video;
  SamplePlan plan;
  SamplingPolicy policy;
  std::vector<PanelRecord> panels;
  std::string toolkit_version;
  nlohmann::json config = nlohmann::json::object();  // resolved run configuration echo

  /// Flattened non-padding source indices must equal plan.frame_indices and
  /// padding may only appear in the final panel. Throws PlanViolation.
  void validate() const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Bilinear resize with half-pixel-centred sampling; channel values are
/// rounded half away from zero. Uniform images stay exactly uniform and a
/// same-size resize is an exact copy. Throws InvalidGeometry for zero sizes.
Image resize_bilinear(const Image& src, int width, int height);

Frame downsample_tile(const Frame& frame, int tile_width, int tile_height);

/// Places tile k at row k / grid_cols, column k % grid_cols. Pixels are copied
/// verbatim. Throws InvalidGeometry on count or size mismatch.
PanelImage compose_panel(std::span<const Frame> tiles, int grid_rows, int grid_cols);

/// Inverse of compose_panel for exact tile sizes.
std::vector<Image> slice_panel(const Image& panel, int grid_rows, int grid_cols);

struct PanelizedVideo {
  std::vector<PanelImage> panels;
  Manifest manifest;  // video_uri, video and policy are left for the caller
};

/// Chunks frames into grid_rows * grid_cols groups, pads the last group with
/// black tiles and composes each group. Without paneling every frame becomes
/// a 1x1 panel, resized only when the plan's tile size differs from the
/// frame. Throws PlanViolation when frames do not match the plan.
PanelizedVideo panelize_sequence(std::span<const Frame> frames, const SamplePlan& plan);

/// End-to-end for one video: plan, read, panelize, write PNGs and
/// manifest.json into out_dir. Returns the manifest as written.
Manifest panelize_video(FrameSource& source, const SamplingPolicy& policy, PlanMode mode,
                        const std::filesystem::path& out_dir,
                        const nlohmann::json& config_echo = nlohmann::json::object());

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

void to_json(nlohmann::json& j, const GammaSpec& g);
void from_json(const nlohmann::json& j, GammaSpec& g);
void to_json(nlohmann::json& j, const SamplingPolicy& p);
void from_json(const nlohmann::json& j, SamplingPolicy& p);
void to_json(nlohmann::json& j, const VideoMeta& m);
void from_json(const nlohmann::json& j, VideoMeta& m);
void to_json(nlohmann::json& j, const SamplePlan& p);
void from_json(const nlohmann::json& j, SamplePlan& p);
void to_json(nlohmann::json& j, const PanelRecord& r);
void from_json(const nlohmann::json& j, PanelRecord& r);
void to_json(nlohmann::json& j, const Manifest& m);
void from_json(const nlohmann::json& j, Manifest& m);

}  // namespace vpanel
