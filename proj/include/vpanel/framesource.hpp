#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpanel/image.hpp"
#include "vpanel/policy.hpp"

namespace vpanel {

/// Sequential frame provider for one video. Instances are single-consumer;
/// independent videos use independent sources.
class FrameSource {
 public:
  enum class Kind { ImageDirectory, DecoderPipe, Generated };

  virtual ~FrameSource() = default;

  virtual Kind kind() const noexcept = 0;
  virtual const std::string& uri() const noexcept = 0;
  virtual const VideoMeta& meta() const noexcept = 0;

  /// Frames at the given strictly increasing indices, in index order.
  /// Throws IndexError for unsorted or out-of-range indices, SourceError for
  /// I/O and decoder failures.
  virtual std::vector<Frame> read_frames(std::span<const std::int64_t> indices) = 0;
};

std::string_view to_string(FrameSource::Kind kind);

struct SourceOptions {
  /// Overrides the sidecar fps of image directories (default 1.0 when absent).
  std::optional<double> fps_override;
  /// Shell template producing metadata as JSON on stdout; `{uri}` is replaced
  /// by the shell-quoted uri. ffprobe's `-of json` stream output and the flat
  /// {frame_count, fps, width, height} form are both understood.
  std::string probe_cmd =
      "ffprobe -v error -select_streams v:0 -count_frames -show_entries "
      "stream=nb_read_frames,avg_frame_rate,width,height -of json {uri}";
  /// Shell template emitting raw packed rgb24 frames back to back on stdout;
  /// `{uri}`, `{width}` and `{height}` are substituted.
  std::string decoder_cmd =
      "ffmpeg -v error -i {uri} -f rawvideo -pix_fmt rgb24 -s {width}x{height} -";
};

/// Opens a directory of PNG frames (lexicographic order) or, for any other
/// uri, a decoder pipe. A directory without frames opens with frame_count 0.
std::unique_ptr<FrameSource> open_source(const std::string& uri,
                                         const SourceOptions& options = {});

/// Metadata of a video. Unlike open_source, an empty directory is a SourceError.
VideoMeta probe(const std::string& uri, const SourceOptions& options = {});

/// Frames synthesized on demand, e.g. test ramps and needle haystacks.
class GeneratedSource final : public FrameSource {
 public:
  using Generator = std::function<Image(std::int64_t index)>;

  GeneratedSource(std::string uri, VideoMeta meta, Generator generator);

  Kind kind() const noexcept override { return Kind::Generated; }
  const std::string& uri() const noexcept override { return uri_; }
  const VideoMeta& meta() const noexcept override { return meta_; }
  std::vector<Frame> read_frames(std::span<const std::int64_t> indices) override;

 private:
  std::string uri_;
  VideoMeta meta_;
  Generator generator_;
};

/// Parses probe output (ffprobe json or the flat schema).
VideoMeta parse_probe_output(const std::string& json_text);

/// Replaces `{key}` placeholders with POSIX-shell-quoted values.
std::string expand_command(std::string_view tmpl,
                           std::span<const std::pair<std::string, std::string>> values);

/// Checks strict ordering and bounds; throws IndexError.
void check_indices(std::span<const std::int64_t> indices, std::int64_t frame_count);

}  // namespace vpanel
