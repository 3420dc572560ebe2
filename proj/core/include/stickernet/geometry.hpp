#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace stickernet::geometry {

/// Axis-aligned placement rectangle in normalized host coordinates.
/// (x, y) is the top-left corner; boxes may extend beyond [0, 1].
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }
    bool valid() const;

    static Box from_center(double cx, double cy, double w, double h) {
        return Box{cx - 0.5 * w, cy - 0.5 * h, w, h};
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Partial derivatives with respect to (x, y, w, h) of the first box.
using BoxGrad = std::array<double, 4>;

double iou(const Box& a, const Box& b);

/// IoU minus squared center distance over the squared diagonal of the
/// smallest enclosing box. Result lies in [-1, 1].
double diou(const Box& a, const Box& b);

/// Analytic gradient of iou(a, fixed) with respect to a.
BoxGrad iou_grad(const Box& a, const Box& fixed);

/// Analytic gradient of diou(a, fixed) with respect to a.
///
/// Where a max/min inside the overlap or enclosing-box terms is tied (edges
/// exactly coincident) the derivative is the mean of the two one-sided
/// derivatives, which is what a central finite difference converges to.
BoxGrad diou_grad(const Box& a, const Box& fixed);

/// Elongation feature (1 - min/max)^2; zero for square stickers.
double aspect_ratio_feature(double width_px, double height_px);

struct GridScale {
    int rows = 0;
    int cols = 0;
    friend bool operator==(const GridScale&, const GridScale&) = default;
};

struct Anchor {
    int scale_index = 0;
    int row = 0;
    int col = 0;
    double center_x = 0.0;
    double center_y = 0.0;
};

/// Multi-scale set of candidate placement cells. Anchors are ordered by
/// scale, then row-major within each scale.
class AnchorGrid {
public:
    explicit AnchorGrid(std::vector<GridScale> scales);

    const std::vector<GridScale>& scales() const { return scales_; }
    const std::vector<Anchor>& anchors() const { return anchors_; }
    std::size_t size() const { return anchors_.size(); }
    const Anchor& operator[](std::size_t i) const { return anchors_[i]; }
    const GridScale& scale_of(std::size_t i) const { return scales_[anchors_[i].scale_index]; }
    /// Index of the first anchor belonging to scale s.
    std::size_t scale_offset(std::size_t s) const { return offsets_[s]; }

private:
    std::vector<GridScale> scales_;
    std::vector<Anchor> anchors_;
    std::vector<std::size_t> offsets_;
};

AnchorGrid build_anchor_grid(std::vector<GridScale> scales);

/// Anchor i is positive iff its center lies in [x, x+w) x [y, y+h).
std::vector<bool> assign_positives(const AnchorGrid& grid, const Box& gt);

/// Index of the anchor whose center is nearest the box center (ties: lowest index).
std::size_t nearest_anchor(const AnchorGrid& grid, const Box& gt);

/// Per-anchor regression target: center offset in cell units and log scale
/// relative to the host.
struct RegressionTarget {
    double dx = 0.0;
    double dy = 0.0;
    double sw = 0.0;
    double sh = 0.0;
};

inline constexpr double kMinDecodedSize = 1e-4;

RegressionTarget encode_target(const AnchorGrid& grid, std::size_t anchor, const Box& gt);

/// Exact inverse of encode_target; decoded w, h are clamped to >= 1e-4.
Box decode_placement(const AnchorGrid& grid, std::size_t anchor, const RegressionTarget& t);

/// Chain rule through decode_placement: maps d(loss)/d(box) to d(loss)/d(target).
/// Clamped dimensions pass zero gradient.
RegressionTarget decode_placement_backward(const AnchorGrid& grid, std::size_t anchor,
                                           const RegressionTarget& t, const BoxGrad& box_grad);

}  // namespace stickernet::geometry
