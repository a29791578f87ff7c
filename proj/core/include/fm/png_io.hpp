#pragma once

#include <filesystem>

#include "fm/image.hpp"

namespace fm {

// 8-bit RGB PNG. Grayscale, palette and alpha inputs are converted to RGB
// on read; 16-bit inputs are stripped to 8 bits.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace fm
