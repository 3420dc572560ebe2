#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "stickernet/backbone.hpp"
#include "stickernet/image.hpp"
#include "stickernet/nn.hpp"
#include "stickernet/training.hpp"

// Type classifier: decides filter-style vs sticker-style, and for filter-style
// whether to mask the foreground and whether to reduce opacity.
namespace stickernet::classifier {

/// A sticker prepared for a network: 4-channel tensor (1, 4, S, S) plus the
/// two scalar side features.
struct StickerInput {
    nn::Tensor4 rgba;
    bool has_alpha = false;
    double aspect_feature = 0.0;
};

/// Squash-resizes to resize_size, then crops input_size: a random window when
/// `crop_rng` is given, the center window otherwise. Images without alpha
/// get a constant 255 alpha plane.
StickerInput make_sticker_input(const Image& sticker, int input_size, int resize_size, Rng* crop_rng = nullptr);

struct Thresholds {
    double filter = 0.5;
    double mask = 0.5;
    double transparency = 0.5;
};

struct TypeDecision {
    double p_filter = 0.0;
    double p_mask = 0.0;
    double p_transparency = 0.0;
    bool is_filter = false;
    bool use_mask = false;      // meaningful only when is_filter
    bool transparency = false;  // meaningful only when is_filter
};

struct TypeLabels {
    bool is_filter = false;
    bool use_mask = false;
    bool transparency = false;
};

struct ClassifierConfig {
    nn::BackboneSpec backbone{4, {16, 32, 32, 32}, {2, 2, 2, 2}, {3}, 1};
    int input_size = 64;
    int resize_size = 80;
    int mlp_hidden = 32;
};

/// Sum of the three BCE terms; mask and transparency terms only count for
/// filter-style labels.
double classifier_loss(const std::array<double, 3>& probs, const TypeLabels& labels);

class TypeClassifier {
public:
    TypeClassifier(ClassifierConfig config, std::uint64_t seed);

    const ClassifierConfig& config() const { return config_; }
    nn::ModelParams& params() { return params_; }
    const nn::ModelParams& params() const { return params_; }

    /// Backbone feature, has_alpha and aspect feature, concatenated.
    std::vector<double> feature_vector(const StickerInput& input) const;
    std::array<double, 3> probabilities(const StickerInput& input) const;
    TypeDecision classify(const StickerInput& input, const Thresholds& thresholds = {}) const;

    /// Mean loss over the batch; accumulates parameter gradients of that mean.
    double loss_and_grad(std::span<const StickerInput> batch, std::span<const TypeLabels> labels);

private:
    struct Forward;
    std::vector<std::array<double, 3>> forward(std::span<const StickerInput> batch, Forward* cache) const;

    ClassifierConfig config_;
    nn::ModelParams params_;
    nn::Backbone backbone_;
    std::array<nn::Linear, 3> mlp_;
};

struct ClassifierSample {
    const Image* sticker = nullptr;
    TypeLabels labels;
};

/// is_filter accuracy under center-crop inference.
double type_accuracy(const TypeClassifier& model, std::span<const ClassifierSample> samples,
                     const Thresholds& thresholds = {});

/// Trains with random crops; refuses a training set lacking either class.
std::vector<EpochMetrics> train_classifier(TypeClassifier& model, nn::SgdMomentum& optimizer,
                                           std::span<const ClassifierSample> train,
                                           std::span<const ClassifierSample> val, const TrainConfig& config,
                                           const EpochCallback& on_epoch = {});

}  // namespace stickernet::classifier
