#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vpanel/image.hpp"

namespace vpanel::png {

// Lossless PNG codec over libpng's simplified API. Inputs with alpha, palette
// or 16-bit samples are converted to 8-bit RGB on decode. Errors surface as
// SourceError.

std::vector<std::uint8_t> encode(const Image& image);
Image decode(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const Image& image);
Image read_file(const std::filesystem::path& path);

}  // namespace vpanel::png
