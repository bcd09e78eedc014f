#include "vpanel/png_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <png.h>

#include "vpanel/error.hpp"

namespace vpanel::png {

namespace {

[[noreturn]] void fail(const std::string& what, const png_image& img) {
  throw Error(ErrorKind::SourceError, what + ": " + img.message);
}

}  // namespace

std::vector<std::uint8_t> encode(const Image& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels().data(), 0, nullptr)) {
    fail("png size query failed", img);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels().data(), 0,
                                 nullptr)) {
    fail("png encode failed", img);
  }
  out.resize(size);
  return out;
}

Image decode(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    fail("png header unreadable", img);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  // Alpha is composited over black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&img, &background, pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    fail("png decode failed", img);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), std::move(pixels));
}

void write_file(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::SourceError, "cannot write " + path.string());
}

Image read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::SourceError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  try {
    return decode(bytes);
  } catch (const Error& e) {
    throw Error(ErrorKind::SourceError, path.string() + ": " + e.what());
  }
}

}  // namespace vpanel::png
