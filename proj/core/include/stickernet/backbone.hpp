#pragma once

#include <string>
#include <vector>

#include "stickernet/nn.hpp"

namespace stickernet::nn {

/// Compact strided convnet: each stage is `convs_per_stage` 3x3 convolutions
/// with ReLU, the first of which carries the stage stride.
struct BackboneSpec {
    int input_channels = 4;
    std::vector<int> widths{16, 32, 64, 64};
    std::vector<int> strides{2, 2, 2, 2};
    /// Stage indices whose outputs are exported as multi-scale features.
    std::vector<int> taps{2, 3};
    int convs_per_stage = 1;

    void validate() const;
    /// Spatial side length of every tap for a square input of side `input`.
    std::vector<int> tap_resolutions(int input) const;
    int global_width() const { return widths.back(); }
};

struct BackboneOutput {
    std::vector<Tensor4> taps;
    Tensor4 global;  // (n, widths.back(), 1, 1): spatial mean of the deepest map
};

struct BackboneCache {
    std::vector<Conv2dCache> convs;
    std::vector<Tensor4> activations;  // post-ReLU output of every conv
    bool valid = false;
};

class Backbone {
public:
    Backbone() = default;
    Backbone(ModelParams& params, const std::string& prefix, BackboneSpec spec, Rng& rng);

    const BackboneSpec& spec() const { return spec_; }

    BackboneOutput forward(const ModelParams& params, const Tensor4& input, BackboneCache* cache = nullptr) const;

    /// Accumulates parameter gradients. `tap_grads` may hold empty tensors for
    /// taps that received no gradient; `global_grad` may be empty likewise.
    /// Returns d(loss)/d(input).
    Tensor4 backward(ModelParams& params, const BackboneCache& cache, const std::vector<Tensor4>& tap_grads,
                     const Tensor4& global_grad) const;

private:
    BackboneSpec spec_;
    std::vector<Conv2d> convs_;
    std::vector<int> stage_last_conv_;
};

}  // namespace stickernet::nn
