#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

namespace stickernet {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double lr = 0.02;
    double momentum = 0.9;
    /// Learning rate is multiplied by `lr_drop_factor` from epoch
    /// floor(lr_drop_fraction * epochs) on.
    double lr_drop_fraction = 0.75;
    double lr_drop_factor = 0.1;
    std::uint64_t seed = 1;
    /// First epoch to run; epochs before it are assumed done (resume).
    int start_epoch = 0;
    /// Exclusive last epoch of this run; negative means `epochs`.
    int stop_epoch = -1;

    double lr_at(int epoch) const;
    int end_epoch() const { return stop_epoch < 0 ? epochs : std::min(stop_epoch, epochs); }
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_metric = 0.0;  // classifier: is_filter accuracy; placement: mean DIoU
    double val_metric = 0.0;
    double lr = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Deterministic per-epoch shuffle of [0, n).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace stickernet
