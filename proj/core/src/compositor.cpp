#include "stickernet/compositor.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stickernet/error.hpp"

namespace stickernet::compositor {

void CompositeSpec::validate() const {
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw InputError("composite: opacity must lie in [0, 1]");
    if (style == Style::sticker) {
        if (!box) throw InputError("composite: sticker style requires a box");
        if (!box->valid()) throw InputError("composite: box must have positive finite size");
    }
    if (use_mask && !mask) throw InputError("composite: use_mask requires a mask");
}

std::uint8_t alpha_over(double fg, double bg, double alpha) {
    const double v = fg * alpha + bg * (1.0 - alpha);
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

CompositeResult composite_sticker(const Image& host, const Image& sticker, const geometry::Box& box,
                                  double opacity) {
    if (!box.valid()) throw InputError("composite_sticker: box must have positive finite size");
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw InputError("composite_sticker: opacity must lie in [0, 1]");
    if (sticker.empty()) throw InputError("composite_sticker: empty sticker");

    CompositeResult result{to_rgba(host), false};
    Image& out = result.image;
    const Image fg = to_rgba(sticker);

    const double bx = box.x * out.width;
    const double by = box.y * out.height;
    const double bw = box.w * out.width;
    const double bh = box.h * out.height;

    // Per-column / per-row source coordinates; NaN marks uncovered.
    std::vector<double> us(static_cast<std::size_t>(out.width), std::nan(""));
    std::vector<double> vs(static_cast<std::size_t>(out.height), std::nan(""));
    bool any_col = false;
    bool any_row = false;
    for (int px = 0; px < out.width; ++px) {
        const double cx = px + 0.5;
        if (cx >= bx && cx < bx + bw) {
            us[px] = (cx - bx) * fg.width / bw - 0.5;
            any_col = true;
        }
    }
    for (int py = 0; py < out.height; ++py) {
        const double cy = py + 0.5;
        if (cy >= by && cy < by + bh) {
            vs[py] = (cy - by) * fg.height / bh - 0.5;
            any_row = true;
        }
    }
    if (!any_col || !any_row) {
        result.outside_canvas = true;
        return result;
    }

    for (int py = 0; py < out.height; ++py) {
        if (std::isnan(vs[py])) continue;
        for (int px = 0; px < out.width; ++px) {
            if (std::isnan(us[px])) continue;
            const double alpha = sample_bilinear(fg, us[px], vs[py], 3) / 255.0 * opacity;
            for (int c = 0; c < 3; ++c) {
                out.at(px, py, c) = alpha_over(sample_bilinear(fg, us[px], vs[py], c), out.at(px, py, c), alpha);
            }
            out.at(px, py, 3) = alpha_over(255.0, out.at(px, py, 3), alpha);
        }
    }
    return result;
}

Image composite_filter(const Image& host, const Image& sticker, bool use_mask, bool transparency,
                       const Image* mask, double filter_opacity) {
    if (sticker.empty()) throw InputError("composite_filter: empty sticker");
    if (use_mask) {
        if (mask == nullptr || mask->empty()) throw InputError("composite_filter: use_mask requires a mask");
        if (mask->width != host.width || mask->height != host.height) {
            throw InputError("composite_filter: mask dimensions must equal host dimensions");
        }
    }
    if (!(filter_opacity >= 0.0 && filter_opacity <= 1.0)) {
        throw InputError("composite_filter: filter opacity must lie in [0, 1]");
    }
    Image out = to_rgba(host);
    const Image fg = to_rgba(sticker);
    const Image gray_mask = use_mask ? to_gray(*mask) : Image{};
    const double opacity = transparency ? filter_opacity : 1.0;

    for (int py = 0; py < out.height; ++py) {
        const double v = resample_coord(py, fg.height, out.height);
        for (int px = 0; px < out.width; ++px) {
            const double u = resample_coord(px, fg.width, out.width);
            double alpha = sample_bilinear(fg, u, v, 3) / 255.0 * opacity;
            if (use_mask) alpha *= 1.0 - gray_mask.at(px, py, 0) / 255.0;
            for (int c = 0; c < 3; ++c) out.at(px, py, c) = alpha_over(sample_bilinear(fg, u, v, c), out.at(px, py, c), alpha);
            out.at(px, py, 3) = alpha_over(255.0, out.at(px, py, 3), alpha);
        }
    }
    return out;
}

CompositeResult composite(const Image& host, const Image& sticker, const CompositeSpec& spec) {
    spec.validate();
    if (spec.style == Style::sticker) return composite_sticker(host, sticker, *spec.box, spec.opacity);
    const bool reduce = spec.opacity < 1.0;
    return CompositeResult{composite_filter(host, sticker, spec.use_mask, reduce,
                                            spec.mask ? &*spec.mask : nullptr, spec.opacity),
                           false};
}

}  // namespace stickernet::compositor
