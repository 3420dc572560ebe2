#pragma once

#include <cmath>
#include <functional>

#include "stickernet/geometry.hpp"
#include "stickernet/rng.hpp"

namespace support {

using stickernet::geometry::Box;

inline Box random_box(stickernet::Rng& rng) {
    return Box{rng.uniform(-0.5, 1.0), rng.uniform(-0.5, 1.0), rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)};
}

inline double central_difference(const std::function<double(double)>& f, double x, double step) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// |a - b| relative to max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Straightforward reference formulas, written independently of the library.
inline double reference_iou(const Box& a, const Box& b) {
    const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = iw * ih;
    return inter / (a.w * a.h + b.w * b.h - inter);
}

inline double reference_diou(const Box& a, const Box& b) {
    const double dx = (a.x + a.w / 2) - (b.x + b.w / 2);
    const double dy = (a.y + a.h / 2) - (b.y + b.h / 2);
    const double ex = std::max(a.x + a.w, b.x + b.w) - std::min(a.x, b.x);
    const double ey = std::max(a.y + a.h, b.y + b.h) - std::min(a.y, b.y);
    return reference_iou(a, b) - (dx * dx + dy * dy) / (ex * ex + ey * ey);
}

}  // namespace support
