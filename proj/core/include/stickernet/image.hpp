#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stickernet/nn.hpp"

namespace stickernet {

/// 8-bit interleaved raster with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 4;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0);

    bool empty() const { return pixels.empty(); }
    bool has_alpha() const { return channels == 4; }
    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width + x) * static_cast<std::size_t>(channels);
    }
    std::uint8_t& at(int x, int y, int c) { return pixels[offset(x, y) + c]; }
    std::uint8_t at(int x, int y, int c) const { return pixels[offset(x, y) + c]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Converts gray/RGB/RGBA to RGBA (missing alpha becomes 255).
Image to_rgba(const Image& img);
/// Luminance-free conversion: takes channel 0 of a gray image, or the mean of RGB.
Image to_gray(const Image& img);

/// Bilinear sample at continuous source-pixel coordinates (pixel centers at
/// integer + 0.5 map to u = integer), edges clamped.
double sample_bilinear(const Image& img, double u, double v, int channel);

/// Source coordinate for destination index `d` when resampling `src` pixels to `dst`.
inline double resample_coord(int d, int src, int dst) {
    return (static_cast<double>(d) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5;
}

Image resize_bilinear(const Image& img, int width, int height);

/// Fits `img` inside a size x size transparent canvas preserving its aspect
/// ratio (centered). Output is RGBA.
Image letterbox(const Image& img, int size);

/// Crops a width x height window with top-left (x0, y0).
Image crop(const Image& img, int x0, int y0, int width, int height);

/// Writes channels [0, channels) scaled to [0, 1] into batch slot `n` of a
/// tensor starting at channel `channel_offset`.
void write_to_tensor(const Image& img, nn::Tensor4& t, int n, int channel_offset);

/// Foreground estimate for images without a supplied mask: pixels whose
/// luminance differs from the mean border luminance by more than `threshold`
/// (0..255) are foreground.
Image luminance_contrast_mask(const Image& img, double threshold = 40.0);

}  // namespace stickernet
