#include <doctest.h>

#include <cmath>

#include "stickernet/classifier.hpp"
#include "stickernet/error.hpp"
#include "stickernet/synth.hpp"

using namespace stickernet;
using namespace stickernet::classifier;

namespace {

ClassifierConfig small_config() {
    ClassifierConfig c;
    c.backbone = nn::BackboneSpec{4, {8, 16, 16}, {2, 2, 2}, {2}, 1};
    c.input_size = 32;
    c.resize_size = 40;
    c.mlp_hidden = 16;
    return c;
}

Image solid(int w, int h, int channels, std::uint8_t v) { return Image(w, h, channels, v); }

}  // namespace

TEST_CASE("sticker input construction") {
    const Image rgb = solid(30, 60, 3, 90);
    const auto in = make_sticker_input(rgb, 32, 40);
    CHECK(in.rgba.shape() == nn::Shape{1, 4, 32, 32});
    CHECK_FALSE(in.has_alpha);
    CHECK(in.aspect_feature == doctest::Approx(0.25));
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) CHECK(in.rgba.at(0, 3, y, x) == 1.0);
    }
    const auto square = make_sticker_input(solid(50, 50, 4, 10), 32, 40);
    CHECK(square.has_alpha);
    CHECK(square.aspect_feature == 0.0);
    CHECK_THROWS_AS(make_sticker_input(Image{}, 32, 40), InputError);
}

TEST_CASE("classifier loss is the sum of active BCE terms") {
    const std::array<double, 3> half{0.5, 0.5, 0.5};
    CHECK(classifier_loss(half, {true, false, true}) == doctest::Approx(3 * std::log(2.0)));
    CHECK(classifier_loss(half, {false, true, true}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("initial loss is near 3 ln 2 for filter labels") {
    TypeClassifier model(small_config(), 3);
    std::vector<StickerInput> batch;
    std::vector<TypeLabels> labels;
    Rng rng(1);
    for (int i = 0; i < 4; ++i) {
        Image img(40, 40, 4);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        batch.push_back(make_sticker_input(img, 32, 40));
        labels.push_back({true, i % 2 == 0, i % 2 == 1});
    }
    const double loss = model.loss_and_grad(batch, labels);
    CHECK(loss == doctest::Approx(3 * std::log(2.0)).epsilon(0.05));
}

TEST_CASE("unreachable thresholds turn every decision off") {
    TypeClassifier model(small_config(), 4);
    const auto in = make_sticker_input(solid(40, 40, 4, 200), 32, 40);
    const auto d = model.classify(in, {1.1, 1.1, 1.1});
    CHECK_FALSE(d.is_filter);
    CHECK_FALSE(d.use_mask);
    CHECK_FALSE(d.transparency);
    const auto p = model.probabilities(in);
    const auto d2 = model.classify(in, {p[0], p[1], p[2]});
    CHECK(d2.is_filter);
    CHECK(d2.use_mask);
    CHECK(d2.transparency);
}

TEST_CASE("inference is deterministic") {
    TypeClassifier a(small_config(), 9);
    TypeClassifier b(small_config(), 9);
    const auto in = make_sticker_input(solid(33, 21, 3, 77), 32, 40);
    CHECK(a.probabilities(in) == b.probabilities(in));
    CHECK(a.probabilities(in) == a.probabilities(in));
}

TEST_CASE("has_alpha changes exactly one feature coordinate") {
    TypeClassifier model(small_config(), 2);
    auto in = make_sticker_input(solid(40, 40, 4, 120), 32, 40);
    in.has_alpha = false;
    const auto f0 = model.feature_vector(in);
    in.has_alpha = true;
    const auto f1 = model.feature_vector(in);
    REQUIRE(f0.size() == f1.size());
    int differing = 0;
    for (std::size_t i = 0; i < f0.size(); ++i) differing += f0[i] != f1[i];
    CHECK(differing == 1);
    CHECK(f1[f1.size() - 2] == 1.0);
}

TEST_CASE("classifier gradient matches finite differences") {
    TypeClassifier model(small_config(), 5);
    Rng rng(2);
    std::vector<StickerInput> batch;
    for (int i = 0; i < 2; ++i) {
        Image img(40, 40, 4);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        batch.push_back(make_sticker_input(img, 32, 40));
    }
    const std::vector<TypeLabels> labels{{true, true, false}, {false, false, false}};
    model.params().zero_grad();
    model.loss_and_grad(batch, labels);
    auto& params = model.params();
    std::vector<std::vector<double>> grads;
    for (auto& p : params) grads.push_back(p.grad);
    params.zero_grad();

    auto objective = [&] {
        const double l = model.loss_and_grad(batch, labels);
        model.params().zero_grad();
        return l;
    };
    const double step = 1e-5;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        for (std::size_t i = 0; i < p.value.size(); i += 1 + p.value.size() / 6) {
            const double keep = p.value[i];
            p.value[i] = keep + step;
            const double up = objective();
            p.value[i] = keep - step;
            const double down = objective();
            p.value[i] = keep;
            const double fd = (up - down) / (2 * step);
            INFO(p.name << "[" << i << "]");
            CHECK(std::abs(grads[k][i] - fd) <= 1e-3 * std::max({std::abs(fd), std::abs(grads[k][i]), 1e-4}));
        }
    }
}

TEST_CASE("training refuses single-class data") {
    TypeClassifier model(small_config(), 1);
    nn::SgdMomentum opt(0.01, 0.9);
    const Image img = solid(40, 40, 4, 1);
    const std::vector<ClassifierSample> only_stickers{{&img, {false, false, false}}, {&img, {false, false, false}}};
    CHECK_THROWS_AS(train_classifier(model, opt, only_stickers, {}, TrainConfig{}), InputError);
    CHECK_THROWS_AS(train_classifier(model, opt, {}, {}, TrainConfig{}), InputError);
}

TEST_CASE("overfits eight samples") {
    const auto ds = dataio::synth_generate(40, 21);
    std::vector<ClassifierSample> samples;
    int filters = 0;
    int stickers = 0;
    for (const auto& r : ds.records) {
        const bool is_filter = r.style_label == dataio::StyleLabel::filter;
        if ((is_filter ? filters : stickers) >= 4) continue;
        (is_filter ? filters : stickers)++;
        samples.push_back({&ds.image(r.sticker_ref), {is_filter, is_filter && r.use_mask(), is_filter && r.transparency()}});
    }
    REQUIRE(samples.size() == 8);
    TypeClassifier model(ClassifierConfig{}, 6);
    nn::SgdMomentum opt(0.003, 0.9);
    TrainConfig tc;
    tc.epochs = 50;
    tc.batch_size = 2;  // 4 steps per epoch: 200 steps in total
    tc.lr = 0.003;
    tc.lr_drop_fraction = 1.0;
    const auto history = train_classifier(model, opt, samples, samples, tc);
    CHECK(history.back().val_metric == 1.0);
    CHECK(history.back().train_loss < history.front().train_loss);
}
