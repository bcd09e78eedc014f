#include "vpanel/image.hpp"

#include <algorithm>
#include <string>

#include "vpanel/error.hpp"

namespace vpanel {

namespace {

std::size_t byte_count(int width, int height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorKind::InvalidGeometry,
                "negative image dimensions " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
}

}  // namespace

Image::Image(int width, int height)
    : width_(width), height_(height), pixels_(byte_count(width, height), 0) {}

Image::Image(int width, int height, Rgb fill) : Image(width, height) {
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (pixels_.size() != byte_count(width, height)) {
    throw Error(ErrorKind::InvalidGeometry,
                "pixel buffer of " + std::to_string(pixels_.size()) +
                    " bytes does not match " + std::to_string(width) + "x" +
                    std::to_string(height) + " RGB");
  }
}

Rgb Image::at(int x, int y) const noexcept {
  const std::size_t o = offset(x, y);
  return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
}

void Image::set(int x, int y, Rgb c) noexcept {
  const std::size_t o = offset(x, y);
  pixels_[o] = c.r;
  pixels_[o + 1] = c.g;
  pixels_[o + 2] = c.b;
}

bool Image::contains_color(Rgb c) const noexcept {
  for (std::size_t i = 0; i + 2 < pixels_.size(); i += 3) {
    if (pixels_[i] == c.r && pixels_[i + 1] == c.g && pixels_[i + 2] == c.b) return true;
  }
  return false;
}

bool Image::is_uniform(Rgb c) const noexcept {
  for (std::size_t i = 0; i + 2 < pixels_.size(); i += 3) {
    if (pixels_[i] != c.r || pixels_[i + 1] != c.g || pixels_[i + 2] != c.b) return false;
  }
  return true;
}

Image Image::crop(int x, int y, int width, int height) const {
  if (x < 0 || y < 0 || width < 0 || height < 0 || x + width > width_ ||
      y + height > height_) {
    throw Error(ErrorKind::InvalidGeometry, "crop window outside image");
  }
  Image out(width, height);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * 3;
  for (int row = 0; row < height; ++row) {
    const auto src = pixels_.begin() + static_cast<std::ptrdiff_t>(offset(x, y + row));
    std::copy_n(src, row_bytes,
                out.pixels_.begin() + static_cast<std::ptrdiff_t>(out.offset(0, row)));
  }
  return out;
}

}  // namespace vpanel
