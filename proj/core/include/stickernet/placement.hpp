#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stickernet/backbone.hpp"
#include "stickernet/classifier.hpp"
#include "stickernet/geometry.hpp"
#include "stickernet/image.hpp"
#include "stickernet/nn.hpp"
#include "stickernet/training.hpp"

// Sticker-style placement predictor: dense per-anchor confidence and box
// regression over multi-scale host features fused with global context.
namespace stickernet::placement {

/// Host RGBA (1, 4, S, S) and foreground mask (1, 1, S, S), values in [0, 1].
struct HostInput {
    nn::Tensor4 rgba;
    nn::Tensor4 fg_mask;
};

/// Resizes host and mask to size x size. Mask dims must equal host dims.
HostInput make_host_input(const Image& host, const Image& mask, int size);

/// Letterboxes the sticker into a transparent size x size canvas so its
/// aspect ratio survives the resize.
classifier::StickerInput make_placement_sticker(const Image& sticker, int size);

enum class RegressionLoss { diou, iou };

struct PlacementConfig {
    int input_size = 64;
    nn::BackboneSpec host_backbone{5, {16, 32, 32, 32}, {2, 2, 2, 2}, {2, 3}, 1};
    nn::BackboneSpec sticker_backbone{4, {8, 16, 16, 16}, {2, 2, 2, 2}, {3}, 1};
    int head_hidden = 64;
    double lambda = 3.0;
    RegressionLoss regression = RegressionLoss::diou;

    /// One grid scale per host tap, from the backbone's downsampling.
    std::vector<geometry::GridScale> grid_scales() const;
};

struct PlacementRaw {
    std::vector<double> confidences;  // probability per anchor
    std::vector<geometry::RegressionTarget> targets;
};

struct PlacementOutput {
    std::vector<double> confidences;
    std::vector<geometry::RegressionTarget> targets;
    std::size_t chosen = 0;
    geometry::Box box;
};

/// Picks the most confident anchor (ties: lowest index) and decodes its box.
PlacementOutput decode_output(const geometry::AnchorGrid& grid, PlacementRaw raw);

struct PlacementLoss {
    double total = 0.0;
    double classification = 0.0;  // mean BCE over all anchors
    double regression = 0.0;      // mean (1 - DIoU) or (1 - IoU) over positives, before lambda
    std::vector<bool> positives;
    bool used_fallback = false;   // no anchor center inside gt; nearest anchor labeled positive
    std::vector<double> d_confidences;
    std::vector<geometry::RegressionTarget> d_targets;
};

/// BCE over all anchors plus lambda times the mean regression loss over
/// positive anchors. Gradients are with respect to the probabilities and the
/// raw regression targets.
PlacementLoss placement_loss(std::span<const double> confidences,
                             std::span<const geometry::RegressionTarget> targets, const geometry::AnchorGrid& grid,
                             const geometry::Box& gt, double lambda, RegressionLoss kind = RegressionLoss::diou);

class PlacementPredictor {
public:
    PlacementPredictor(PlacementConfig config, std::uint64_t seed);

    const PlacementConfig& config() const { return config_; }
    const geometry::AnchorGrid& grid() const { return grid_; }
    nn::ModelParams& params() { return params_; }
    const nn::ModelParams& params() const { return params_; }

    PlacementOutput predict(const HostInput& host, const classifier::StickerInput& sticker) const;
    std::vector<PlacementRaw> forward_raw(std::span<const HostInput> hosts,
                                          std::span<const classifier::StickerInput> stickers) const;

    /// Mean placement loss over the batch; accumulates gradients of that mean.
    double loss_and_grad(std::span<const HostInput> hosts, std::span<const classifier::StickerInput> stickers,
                         std::span<const geometry::Box> gts);

private:
    struct Forward;
    struct Head {
        nn::Conv2d conf0, conf1, reg0, reg1;
    };
    std::vector<PlacementRaw> forward(std::span<const HostInput> hosts,
                                      std::span<const classifier::StickerInput> stickers, Forward* cache) const;

    PlacementConfig config_;
    nn::ModelParams params_;
    geometry::AnchorGrid grid_;
    nn::Backbone host_backbone_;
    nn::Backbone sticker_backbone_;
    std::vector<Head> heads_;
};

struct PlacementSample {
    const Image* host = nullptr;
    const Image* mask = nullptr;
    const Image* sticker = nullptr;
    geometry::Box gt;
};

/// Mean DIoU between predicted and ground-truth boxes.
double mean_diou(const PlacementPredictor& model, std::span<const PlacementSample> samples);

std::vector<EpochMetrics> train_placement(PlacementPredictor& model, nn::SgdMomentum& optimizer,
                                          std::span<const PlacementSample> train,
                                          std::span<const PlacementSample> val, const TrainConfig& config,
                                          const EpochCallback& on_epoch = {});

}  // namespace stickernet::placement
