#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vpanel {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Packed 8-bit RGB, row-major, three interleaved channels.
class Image {
 public:
  Image() = default;
  Image(int width, int height);
  Image(int width, int height, Rgb fill);
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  Rgb at(int x, int y) const noexcept;
  void set(int x, int y, Rgb c) noexcept;

  bool contains_color(Rgb c) const noexcept;
  bool is_uniform(Rgb c) const noexcept;

  /// Copy of the width x height window whose top-left corner is (x, y).
  Image crop(int x, int y, int width, int height) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// One decoded video frame. Frames are immutable once produced.
struct Frame {
  std::int64_t index = 0;
  double timestamp_seconds = 0.0;
  Image image;

  int width() const noexcept { return image.width(); }
  int height() const noexcept { return image.height(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

}  // namespace vpanel
