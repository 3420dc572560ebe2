#include <benchmark/benchmark.h>

#include "stickernet/compositor.hpp"
#include "stickernet/geometry.hpp"
#include "stickernet/nn.hpp"
#include "stickernet/placement.hpp"
#include "stickernet/rng.hpp"

using namespace stickernet;

namespace {

Image noise(int w, int h, int c, Rng& rng) {
    Image img(w, h, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

void BM_DiouGrad(benchmark::State& state) {
    const geometry::Box a{0.1, 0.2, 0.3, 0.4};
    const geometry::Box b{0.25, 0.15, 0.5, 0.3};
    for (auto _ : state) {
        benchmark::DoNotOptimize(geometry::diou(a, b));
        benchmark::DoNotOptimize(geometry::diou_grad(a, b));
    }
}
BENCHMARK(BM_DiouGrad);

void BM_ConvForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Rng rng(1);
    nn::ModelParams params(1);
    const nn::Conv2d conv(params, "conv", 16, 32, 3, 1, 1, rng);
    nn::Tensor4 x(nn::Shape{8, 16, size, size});
    for (double& v : x.data()) v = rng.uniform(-1, 1);
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(params, x));
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32);

void BM_PlacementPredict(benchmark::State& state) {
    Rng rng(2);
    const placement::PlacementPredictor model(placement::PlacementConfig{}, 3);
    const auto host = placement::make_host_input(noise(64, 64, 3, rng), noise(64, 64, 1, rng), 64);
    const auto sticker = placement::make_placement_sticker(noise(24, 32, 4, rng), 64);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(host, sticker));
}
BENCHMARK(BM_PlacementPredict);

void BM_CompositeSticker(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    Rng rng(4);
    const Image host = noise(size, size, 4, rng);
    const Image sticker = noise(size / 2, size / 2, 4, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(compositor::composite_sticker(host, sticker, {0.2, 0.2, 0.5, 0.5}, 0.8));
    }
}
BENCHMARK(BM_CompositeSticker)->Arg(64)->Arg(256);

void BM_CompositeFilter(benchmark::State& state) {
    Rng rng(5);
    const Image host = noise(256, 256, 4, rng);
    const Image overlay = noise(128, 128, 4, rng);
    const Image mask = noise(256, 256, 1, rng);
    for (auto _ : state) benchmark::DoNotOptimize(compositor::composite_filter(host, overlay, true, true, &mask));
}
BENCHMARK(BM_CompositeFilter);

}  // namespace
BENCHMARK_MAIN();
