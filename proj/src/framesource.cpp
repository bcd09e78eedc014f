#include "vpanel/framesource.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "vpanel/error.hpp"
#include "vpanel/png_io.hpp"

namespace vpanel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string read_text_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tail_excerpt(std::string text, std::size_t max_bytes = 512) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (text.size() > max_bytes) text = "..." + text.substr(text.size() - max_bytes);
  return text;
}

// Shell command with stdout on a pipe and stderr captured to a temp file.
class PipeProcess {
 public:
  explicit PipeProcess(const std::string& command) {
    char tmpl[] = "/tmp/vpanel-stderr-XXXXXX";
    const int fd = ::mkstemp(tmpl);
    if (fd < 0) throw Error(ErrorKind::SourceError, "cannot create stderr capture file");
    ::close(fd);
    stderr_path_ = tmpl;
    const std::string wrapped = "( " + command + " ) 2>" + shell_quote(stderr_path_.string());
    pipe_ = ::popen(wrapped.c_str(), "r");
    if (pipe_ == nullptr) {
      fs::remove(stderr_path_);
      throw Error(ErrorKind::SourceError, "cannot start: " + command);
    }
  }

  PipeProcess(const PipeProcess&) = delete;
  PipeProcess& operator=(const PipeProcess&) = delete;

  ~PipeProcess() {
    close();
    std::error_code ec;
    fs::remove(stderr_path_, ec);
  }

  /// Fills `buffer` completely; false on EOF or short read.
  bool read_exact(std::span<std::uint8_t> buffer) {
    std::size_t got = 0;
    while (got < buffer.size()) {
      const std::size_t n = std::fread(buffer.data() + got, 1, buffer.size() - got, pipe_);
      if (n == 0) break;
      got += n;
    }
    last_read_ = got;
    return got == buffer.size();
  }

  std::size_t last_read() const noexcept { return last_read_; }

  std::string read_all() {
    std::string out;
    char chunk[4096];
    std::size_t n = 0;
    while ((n = std::fread(chunk, 1, sizeof chunk, pipe_)) > 0) out.append(chunk, n);
    return out;
  }

  /// Waits for the child; returns its exit code (128 + signal when killed).
  int close() {
    if (pipe_ == nullptr) return status_;
    const int raw = ::pclose(pipe_);
    pipe_ = nullptr;
    if (raw == -1) {
      status_ = -1;
    } else if (WIFEXITED(raw)) {
      status_ = WEXITSTATUS(raw);
    } else if (WIFSIGNALED(raw)) {
      status_ = 128 + WTERMSIG(raw);
    }
    return status_;
  }

  std::string stderr_excerpt() const { return tail_excerpt(read_text_file(stderr_path_)); }

 private:
  FILE* pipe_ = nullptr;
  fs::path stderr_path_;
  std::size_t last_read_ = 0;
  int status_ = 0;
};

bool has_png_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

double parse_rate(const json& value) {
  if (value.is_number()) return value.get<double>();
  const auto text = value.get<std::string>();
  const auto slash = text.find('/');
  if (slash == std::string::npos) return std::stod(text);
  const double num = std::stod(text.substr(0, slash));
  const double den = std::stod(text.substr(slash + 1));
  return den == 0.0 ? 0.0 : num / den;
}

std::int64_t parse_count(const json& value) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  return std::stoll(value.get<std::string>());
}

class ImageDirectorySource final : public FrameSource {
 public:
  ImageDirectorySource(std::string uri, const SourceOptions& options) : uri_(std::move(uri)) {
    const fs::path dir(uri_);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && has_png_extension(entry.path())) {
        files_.push_back(entry.path());
      }
    }
    std::sort(files_.begin(), files_.end(), [](const fs::path& a, const fs::path& b) {
      return a.filename().string() < b.filename().string();
    });

    double fps = 1.0;
    int width = 0;
    int height = 0;
    const fs::path sidecar = dir / "meta.json";
    if (fs::exists(sidecar)) {
      try {
        const json meta = json::parse(read_text_file(sidecar));
        fps = meta.value("fps", 1.0);
        width = meta.value("width", 0);
        height = meta.value("height", 0);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::SourceError, sidecar.string() + ": " + e.what());
      }
    }
    if (options.fps_override) fps = *options.fps_override;
    if (!files_.empty()) {
      const Image first = png::read_file(files_.front());
      if ((width != 0 && width != first.width()) || (height != 0 && height != first.height())) {
        throw Error(ErrorKind::SourceError,
                    fmt::format("{}: sidecar size {}x{} disagrees with {} ({}x{})", uri_, width,
                                height, files_.front().filename().string(), first.width(),
                                first.height()));
      }
      width = first.width();
      height = first.height();
    }
    meta_ = VideoMeta::from_count(static_cast<std::int64_t>(files_.size()), fps, width, height);
  }

  Kind kind() const noexcept override { return Kind::ImageDirectory; }
  const std::string& uri() const noexcept override { return uri_; }
  const VideoMeta& meta() const noexcept override { return meta_; }

  std::vector<Frame> read_frames(std::span<const std::int64_t> indices) override {
    check_indices(indices, meta_.frame_count);
    std::vector<Frame> out;
    out.reserve(indices.size());
    for (const std::int64_t i : indices) {
      Image img = png::read_file(files_[static_cast<std::size_t>(i)]);
      if (img.width() != meta_.width || img.height() != meta_.height) {
        throw Error(ErrorKind::SourceError,
                    fmt::format("{} is {}x{}, expected {}x{}",
                                files_[static_cast<std::size_t>(i)].string(), img.width(),
                                img.height(), meta_.width, meta_.height));
      }
      out.push_back({i, static_cast<double>(i) / meta_.fps, std::move(img)});
    }
    return out;
  }

 private:
  std::string uri_;
  std::vector<fs::path> files_;
  VideoMeta meta_;
};

class DecoderPipeSource final : public FrameSource {
 public:
  DecoderPipeSource(std::string uri, VideoMeta meta, std::string decoder_cmd)
      : uri_(std::move(uri)), meta_(meta), decoder_cmd_(std::move(decoder_cmd)) {}

  Kind kind() const noexcept override { return Kind::DecoderPipe; }
  const std::string& uri() const noexcept override { return uri_; }
  const VideoMeta& meta() const noexcept override { return meta_; }

  // One forward pass per call; unrequested frames are read and dropped.
  std::vector<Frame> read_frames(std::span<const std::int64_t> indices) override {
    check_indices(indices, meta_.frame_count);
    std::vector<Frame> out;
    if (indices.empty()) return out;
    out.reserve(indices.size());

    const std::pair<std::string, std::string> values[] = {
        {"uri", uri_},
        {"width", std::to_string(meta_.width)},
        {"height", std::to_string(meta_.height)},
    };
    PipeProcess proc(expand_command(decoder_cmd_, values));
    const std::size_t stride = static_cast<std::size_t>(meta_.width) *
                               static_cast<std::size_t>(meta_.height) * 3;
    std::vector<std::uint8_t> scratch(stride);

    std::int64_t position = 0;
    for (const std::int64_t wanted : indices) {
      for (; position < wanted; ++position) {
        if (!proc.read_exact(scratch)) fail_short_read(proc, position);
      }
      std::vector<std::uint8_t> pixels(stride);
      if (!proc.read_exact(pixels)) fail_short_read(proc, position);
      out.push_back({wanted, static_cast<double>(wanted) / meta_.fps,
                     Image(meta_.width, meta_.height, std::move(pixels))});
      ++position;
    }
    if (position < meta_.frame_count) {
      // Closing early may kill the decoder with SIGPIPE; every requested
      // frame is already in hand, so its exit status is irrelevant here.
      proc.close();
      return out;
    }
    const std::size_t trailing = proc.read_all().size();
    const int status = proc.close();
    if (status != 0) {
      throw Error(ErrorKind::SourceError,
                  fmt::format("{}: decoder exited with {} ({} trailing bytes): {}", uri_, status,
                              trailing, proc.stderr_excerpt()));
    }
    return out;
  }

 private:
  [[noreturn]] void fail_short_read(PipeProcess& proc, std::int64_t position) {
    const std::size_t partial = proc.last_read();
    const int status = proc.close();
    throw Error(ErrorKind::SourceError,
                fmt::format("{}: decoder stream ended at frame {} ({} stray bytes, exit {}): {}",
                            uri_, position, partial, status, proc.stderr_excerpt()));
  }

  std::string uri_;
  VideoMeta meta_;
  std::string decoder_cmd_;
};

VideoMeta probe_with_command(const std::string& uri, const SourceOptions& options) {
  const std::pair<std::string, std::string> values[] = {{"uri", uri}};
  PipeProcess proc(expand_command(options.probe_cmd, values));
  const std::string output = proc.read_all();
  const int status = proc.close();
  if (status != 0) {
    throw Error(ErrorKind::SourceError,
                fmt::format("{}: probe exited with {}: {}", uri, status, proc.stderr_excerpt()));
  }
  try {
    VideoMeta meta = parse_probe_output(output);
    if (options.fps_override) {
      meta = VideoMeta::from_count(meta.frame_count, *options.fps_override, meta.width,
                                   meta.height);
    }
    return meta;
  } catch (const Error& e) {
    throw Error(ErrorKind::SourceError, uri + ": " + e.what() + " (stderr: " +
                                            proc.stderr_excerpt() + ")");
  }
}

}  // namespace

std::string_view to_string(FrameSource::Kind kind) {
  switch (kind) {
    case FrameSource::Kind::ImageDirectory: return "image_directory";
    case FrameSource::Kind::DecoderPipe: return "decoder_pipe";
    case FrameSource::Kind::Generated: return "generated";
  }
  return "unknown";
}

std::string expand_command(std::string_view tmpl,
                           std::span<const std::pair<std::string, std::string>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string_view key = tmpl.substr(i + 1, close - i - 1);
        const auto it = std::find_if(values.begin(), values.end(),
                                     [&](const auto& kv) { return kv.first == key; });
        if (it != values.end()) {
          out += shell_quote(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

void check_indices(std::span<const std::int64_t> indices, std::int64_t frame_count) {
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= frame_count) {
      throw Error(ErrorKind::IndexError, fmt::format("frame index {} outside [0, {})",
                                                     indices[k], frame_count));
    }
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw Error(ErrorKind::IndexError,
                  fmt::format("frame indices must be strictly increasing ({} after {})",
                              indices[k], indices[k - 1]));
    }
  }
}

VideoMeta parse_probe_output(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SourceError, std::string("probe output is not JSON: ") + e.what());
  }
  try {
    std::int64_t frames = 0;
    double fps = 0.0;
    int width = 0;
    int height = 0;
    if (doc.contains("streams")) {
      if (doc["streams"].empty()) throw Error(ErrorKind::SourceError, "no video stream");
      const json& s = doc["streams"][0];
      frames = parse_count(s.contains("nb_read_frames") ? s["nb_read_frames"] : s.at("nb_frames"));
      fps = parse_rate(s.contains("avg_frame_rate") ? s["avg_frame_rate"] : s.at("r_frame_rate"));
      width = s.at("width").get<int>();
      height = s.at("height").get<int>();
    } else {
      frames = parse_count(doc.at("frame_count"));
      fps = parse_rate(doc.at("fps"));
      width = doc.at("width").get<int>();
      height = doc.at("height").get<int>();
    }
    const VideoMeta meta = VideoMeta::from_count(frames, fps, width, height);
    meta.validate();
    return meta;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SourceError, std::string("probe output missing fields: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorKind::SourceError, "probe output has non-numeric fields");
  }
}

std::unique_ptr<FrameSource> open_source(const std::string& uri, const SourceOptions& options) {
  std::error_code ec;
  if (fs::is_directory(uri, ec)) return std::make_unique<ImageDirectorySource>(uri, options);
  VideoMeta meta = probe_with_command(uri, options);
  return std::make_unique<DecoderPipeSource>(uri, meta, options.decoder_cmd);
}

VideoMeta probe(const std::string& uri, const SourceOptions& options) {
  auto source = open_source(uri, options);
  if (source->meta().frame_count == 0) {
    throw Error(ErrorKind::SourceError, uri + ": no decodable frames");
  }
  source->meta().validate();
  return source->meta();
}

GeneratedSource::GeneratedSource(std::string uri, VideoMeta meta, Generator generator)
    : uri_(std::move(uri)), meta_(meta), generator_(std::move(generator)) {}

std::vector<Frame> GeneratedSource::read_frames(std::span<const std::int64_t> indices) {
  check_indices(indices, meta_.frame_count);
  std::vector<Frame> out;
  out.reserve(indices.size());
  for (const std::int64_t i : indices) {
    Image img = generator_(i);
    if (img.width() != meta_.width || img.height() != meta_.height) {
      throw Error(ErrorKind::SourceError, "generator produced a frame of the wrong size");
    }
    out.push_back({i, static_cast<double>(i) / meta_.fps, std::move(img)});
  }
  return out;
}

}  // namespace vpanel
