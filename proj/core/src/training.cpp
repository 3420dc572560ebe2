#include "stickernet/training.hpp"

#include <cmath>
#include <numeric>

#include "stickernet/rng.hpp"

namespace stickernet {

double TrainConfig::lr_at(int epoch) const {
    const int drop = static_cast<int>(std::floor(lr_drop_fraction * epochs));
    return epoch >= drop ? lr * lr_drop_factor : lr;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x45504F4348ULL + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    return order;
}

}  // namespace stickernet
