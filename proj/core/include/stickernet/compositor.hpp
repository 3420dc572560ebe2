#pragma once

#include <cstdint>
#include <optional>

#include "stickernet/geometry.hpp"
#include "stickernet/image.hpp"

// Straight-alpha compositing on stored sRGB byte values.
namespace stickernet::compositor {

enum class Style { filter, sticker };

inline constexpr double kDefaultFilterOpacity = 0.6;

struct CompositeSpec {
    Style style = Style::sticker;
    std::optional<geometry::Box> box;  // required for sticker style
    double opacity = 1.0;
    bool use_mask = false;             // filter style only
    std::optional<Image> mask;         // 1-channel, host-sized; required when use_mask

    /// Throws InputError when an invariant does not hold.
    void validate() const;
};

/// out = fg * alpha + bg * (1 - alpha), rounded half away from zero.
std::uint8_t alpha_over(double fg, double bg, double alpha);

struct CompositeResult {
    Image image;                  // RGBA, host dimensions
    bool outside_canvas = false;  // box covered no host pixel; image is the host
};

/// Resamples the sticker bilinearly into `box` (normalized host coordinates)
/// and blends it with effective alpha = sticker alpha * opacity. A host pixel
/// is covered when its center lies in [x, x+w) x [y, y+h) in pixel units.
CompositeResult composite_sticker(const Image& host, const Image& sticker, const geometry::Box& box,
                                  double opacity = 1.0);

/// Full-canvas overlay. With `transparency` the overlay opacity is
/// `filter_opacity`; with `use_mask` the overlay alpha is multiplied by
/// (1 - mask) so foreground regions show the host.
Image composite_filter(const Image& host, const Image& sticker, bool use_mask, bool transparency,
                       const Image* mask, double filter_opacity = kDefaultFilterOpacity);

CompositeResult composite(const Image& host, const Image& sticker, const CompositeSpec& spec);

}  // namespace stickernet::compositor
