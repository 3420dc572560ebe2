#include "stickernet/backbone.hpp"

#include <algorithm>

#include "stickernet/error.hpp"

namespace stickernet::nn {

void BackboneSpec::validate() const {
    if (input_channels < 1) throw InputError("backbone: input_channels must be >= 1");
    if (widths.empty() || widths.size() != strides.size()) {
        throw InputError("backbone: widths and strides must be non-empty and of equal length");
    }
    if (convs_per_stage < 1) throw InputError("backbone: convs_per_stage must be >= 1");
    for (int w : widths) {
        if (w < 1) throw InputError("backbone: stage widths must be >= 1");
    }
    for (int s : strides) {
        if (s < 1) throw InputError("backbone: strides must be >= 1");
    }
    if (taps.empty()) throw InputError("backbone: at least one tap is required");
    for (std::size_t i = 0; i < taps.size(); ++i) {
        if (taps[i] < 0 || taps[i] >= static_cast<int>(widths.size())) {
            throw InputError("backbone: tap index out of range");
        }
        if (i > 0 && taps[i] <= taps[i - 1]) throw InputError("backbone: taps must be strictly increasing");
    }
}

std::vector<int> BackboneSpec::tap_resolutions(int input) const {
    validate();
    std::vector<int> side;
    int s = input;
    for (std::size_t stage = 0; stage < widths.size(); ++stage) {
        // 3x3, pad 1: out = (in + 2 - 3) / stride + 1
        s = (s - 1) / strides[stage] + 1;
        side.push_back(s);
    }
    std::vector<int> out;
    for (int t : taps) out.push_back(side[t]);
    return out;
}

Backbone::Backbone(ModelParams& params, const std::string& prefix, BackboneSpec spec, Rng& rng)
    : spec_(std::move(spec)) {
    spec_.validate();
    int in = spec_.input_channels;
    for (std::size_t stage = 0; stage < spec_.widths.size(); ++stage) {
        for (int k = 0; k < spec_.convs_per_stage; ++k) {
            const std::string name = prefix + ".stage" + std::to_string(stage) + ".conv" + std::to_string(k);
            const int stride = k == 0 ? spec_.strides[stage] : 1;
            convs_.emplace_back(params, name, in, spec_.widths[stage], 3, stride, 1, rng);
            in = spec_.widths[stage];
        }
        stage_last_conv_.push_back(static_cast<int>(convs_.size()) - 1);
    }
}

BackboneOutput Backbone::forward(const ModelParams& params, const Tensor4& input, BackboneCache* cache) const {
    if (input.shape().c != spec_.input_channels) {
        throw InputError("backbone: expected " + std::to_string(spec_.input_channels) + " channels, got " +
                         to_string(input.shape()));
    }
    if (cache != nullptr) {
        cache->convs.assign(convs_.size(), {});
        cache->activations.assign(convs_.size(), {});
    }
    BackboneOutput out;
    Tensor4 x = input;
    std::size_t next_tap = 0;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        x = convs_[i].forward(params, x, cache != nullptr ? &cache->convs[i] : nullptr);
        relu_inplace(x);
        if (cache != nullptr) cache->activations[i] = x;
        const auto stage = static_cast<int>(i) / spec_.convs_per_stage;
        if (next_tap < spec_.taps.size() && stage_last_conv_[stage] == static_cast<int>(i) &&
            spec_.taps[next_tap] == stage) {
            out.taps.push_back(x);
            ++next_tap;
        }
    }
    out.global = global_avg_pool(x);
    if (cache != nullptr) cache->valid = true;
    return out;
}

Tensor4 Backbone::backward(ModelParams& params, const BackboneCache& cache, const std::vector<Tensor4>& tap_grads,
                           const Tensor4& global_grad) const {
    if (!cache.valid) throw StateError("Backbone::backward called without a forward cache");
    if (tap_grads.size() != spec_.taps.size()) throw InputError("backbone: one gradient per tap is required");

    const Tensor4& deepest = cache.activations.back();
    Tensor4 grad = global_grad.empty() ? Tensor4(deepest.shape())
                                       : global_avg_pool_backward(deepest.shape(), global_grad);
    int next_tap = static_cast<int>(spec_.taps.size()) - 1;
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        const int stage = i / spec_.convs_per_stage;
        if (next_tap >= 0 && stage_last_conv_[stage] == i && spec_.taps[next_tap] == stage) {
            const Tensor4& tg = tap_grads[next_tap];
            if (!tg.empty()) {
                if (tg.shape() != grad.shape()) throw InputError("backbone: tap gradient shape mismatch");
                auto g = grad.data();
                const auto t = tg.data();
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += t[j];
            }
            --next_tap;
        }
        grad = relu_backward(cache.activations[i], grad);
        grad = convs_[i].backward(params, cache.convs[i], grad);
    }
    return grad;
}

}  // namespace stickernet::nn
