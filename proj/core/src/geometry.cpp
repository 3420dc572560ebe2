#include "stickernet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stickernet/error.hpp"

namespace stickernet::geometry {

bool Box::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 &&
           h > 0.0;
}

namespace {

// d max(p, q) / dp and d min(p, q) / dp, splitting ties evenly.
double dmax_first(double p, double q) { return p > q ? 1.0 : (p < q ? 0.0 : 0.5); }
double dmin_first(double p, double q) { return p < q ? 1.0 : (p > q ? 0.0 : 0.5); }

// Quantities along one axis, with derivatives w.r.t. the first box's
// position (p) and extent (s) on that axis.
struct AxisTerms {
    double overlap = 0.0;
    double d_overlap_dp = 0.0;
    double d_overlap_ds = 0.0;
    double enclose = 0.0;
    double d_enclose_dp = 0.0;
    double d_enclose_ds = 0.0;
    double center_delta = 0.0;  // center(a) - center(b)
};

AxisTerms axis_terms(double ap, double as, double bp, double bs) {
    AxisTerms t;
    const double a1 = ap + as;
    const double b1 = bp + bs;

    const double lo = std::max(ap, bp);
    const double hi = std::min(a1, b1);
    const double len = hi - lo;
    const double dlen_dp = dmin_first(a1, b1) - dmax_first(ap, bp);
    const double dlen_ds = dmin_first(a1, b1);
    const double gate = len > 0.0 ? 1.0 : (len < 0.0 ? 0.0 : 0.5);
    t.overlap = std::max(0.0, len);
    t.d_overlap_dp = gate * dlen_dp;
    t.d_overlap_ds = gate * dlen_ds;

    t.enclose = std::max(a1, b1) - std::min(ap, bp);
    t.d_enclose_dp = dmax_first(a1, b1) - dmin_first(ap, bp);
    t.d_enclose_ds = dmax_first(a1, b1);

    t.center_delta = (ap + 0.5 * as) - (bp + 0.5 * bs);
    return t;
}

struct OverlapEval {
    double iou = 0.0;
    double penalty = 0.0;
    BoxGrad d_iou{};
    BoxGrad d_penalty{};
};

OverlapEval evaluate_overlap(const Box& a, const Box& b) {
    const AxisTerms tx = axis_terms(a.x, a.w, b.x, b.w);
    const AxisTerms ty = axis_terms(a.y, a.h, b.y, b.h);
    OverlapEval e;

    const double inter = tx.overlap * ty.overlap;
    const double uni = a.area() + b.area() - inter;
    e.iou = inter / uni;

    const BoxGrad d_inter{tx.d_overlap_dp * ty.overlap, ty.d_overlap_dp * tx.overlap,
                          tx.d_overlap_ds * ty.overlap, ty.d_overlap_ds * tx.overlap};
    const BoxGrad d_area{0.0, 0.0, a.h, a.w};
    for (int k = 0; k < 4; ++k) {
        const double d_union = d_area[k] - d_inter[k];
        e.d_iou[k] = (d_inter[k] * uni - inter * d_union) / (uni * uni);
    }

    const double rho2 = tx.center_delta * tx.center_delta + ty.center_delta * ty.center_delta;
    const double c2 = tx.enclose * tx.enclose + ty.enclose * ty.enclose;
    if (c2 <= 0.0) return e;
    e.penalty = rho2 / c2;

    const BoxGrad d_rho2{2.0 * tx.center_delta, 2.0 * ty.center_delta, tx.center_delta, ty.center_delta};
    const BoxGrad d_c2{2.0 * tx.enclose * tx.d_enclose_dp, 2.0 * ty.enclose * ty.d_enclose_dp,
                       2.0 * tx.enclose * tx.d_enclose_ds, 2.0 * ty.enclose * ty.d_enclose_ds};
    for (int k = 0; k < 4; ++k) {
        e.d_penalty[k] = (d_rho2[k] * c2 - rho2 * d_c2[k]) / (c2 * c2);
    }
    return e;
}

}  // namespace

double iou(const Box& a, const Box& b) {
    if (a == b) return 1.0;
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

double diou(const Box& a, const Box& b) {
    if (a == b) return 1.0;
    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    const double cw = std::max(a.right(), b.right()) - std::min(a.x, b.x);
    const double ch = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
    const double c2 = cw * cw + ch * ch;
    if (c2 <= 0.0) return 1.0;
    return iou(a, b) - (dx * dx + dy * dy) / c2;
}

BoxGrad iou_grad(const Box& a, const Box& fixed) { return evaluate_overlap(a, fixed).d_iou; }

BoxGrad diou_grad(const Box& a, const Box& fixed) {
    const OverlapEval e = evaluate_overlap(a, fixed);
    BoxGrad g{};
    for (int k = 0; k < 4; ++k) g[k] = e.d_iou[k] - e.d_penalty[k];
    return g;
}

double aspect_ratio_feature(double width_px, double height_px) {
    if (!(width_px > 0.0) || !(height_px > 0.0)) {
        throw InputError("aspect_ratio_feature: dimensions must be positive");
    }
    const double r = 1.0 - std::min(width_px, height_px) / std::max(width_px, height_px);
    return r * r;
}

AnchorGrid::AnchorGrid(std::vector<GridScale> scales) : scales_(std::move(scales)) {
    if (scales_.empty()) throw InputError("anchor grid needs at least one scale");
    std::size_t total = 0;
    for (const auto& s : scales_) {
        if (s.rows < 1 || s.cols < 1) throw InputError("anchor grid scale must have rows, cols >= 1");
        total += static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
    }
    anchors_.reserve(total);
    for (std::size_t si = 0; si < scales_.size(); ++si) {
        offsets_.push_back(anchors_.size());
        const auto& s = scales_[si];
        for (int r = 0; r < s.rows; ++r) {
            for (int c = 0; c < s.cols; ++c) {
                anchors_.push_back(Anchor{static_cast<int>(si), r, c, (c + 0.5) / s.cols, (r + 0.5) / s.rows});
            }
        }
    }
}

AnchorGrid build_anchor_grid(std::vector<GridScale> scales) { return AnchorGrid(std::move(scales)); }

std::vector<bool> assign_positives(const AnchorGrid& grid, const Box& gt) {
    std::vector<bool> positive(grid.size(), false);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Anchor& a = grid[i];
        positive[i] = a.center_x >= gt.x && a.center_x < gt.right() && a.center_y >= gt.y &&
                      a.center_y < gt.bottom();
    }
    return positive;
}

std::size_t nearest_anchor(const AnchorGrid& grid, const Box& gt) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double dx = grid[i].center_x - gt.center_x();
        const double dy = grid[i].center_y - gt.center_y();
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

RegressionTarget encode_target(const AnchorGrid& grid, std::size_t anchor, const Box& gt) {
    const Anchor& a = grid[anchor];
    const GridScale& s = grid.scale_of(anchor);
    return RegressionTarget{(gt.center_x() - a.center_x) * s.cols, (gt.center_y() - a.center_y) * s.rows,
                            std::log(gt.w), std::log(gt.h)};
}

Box decode_placement(const AnchorGrid& grid, std::size_t anchor, const RegressionTarget& t) {
    const Anchor& a = grid[anchor];
    const GridScale& s = grid.scale_of(anchor);
    const double cx = a.center_x + t.dx / s.cols;
    const double cy = a.center_y + t.dy / s.rows;
    const double w = std::max(std::exp(t.sw), kMinDecodedSize);
    const double h = std::max(std::exp(t.sh), kMinDecodedSize);
    return Box::from_center(cx, cy, w, h);
}

RegressionTarget decode_placement_backward(const AnchorGrid& grid, std::size_t anchor,
                                           const RegressionTarget& t, const BoxGrad& g) {
    const GridScale& s = grid.scale_of(anchor);
    const double ew = std::exp(t.sw);
    const double eh = std::exp(t.sh);
    // x = cx - w/2, so dL/dw_total = dL/dw - dL/dx / 2.
    RegressionTarget out;
    out.dx = g[0] / s.cols;
    out.dy = g[1] / s.rows;
    out.sw = ew > kMinDecodedSize ? (g[2] - 0.5 * g[0]) * ew : 0.0;
    out.sh = eh > kMinDecodedSize ? (g[3] - 0.5 * g[1]) * eh : 0.0;
    return out;
}

}  // namespace stickernet::geometry
