#pragma once

#include <filesystem>

#include "stickernet/image.hpp"

namespace stickernet {

/// Reads an 8-bit PNG. Palette and 16-bit images are converted to 8-bit;
/// gray+alpha is expanded to RGBA. Throws DataError on failure.
Image read_png(const std::filesystem::path& path);

/// Writes a 1, 3 or 4 channel image as PNG. Output bytes are deterministic.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace stickernet
