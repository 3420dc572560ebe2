#include <doctest.h>

#include <cmath>
#include <functional>

#include "stickernet/backbone.hpp"
#include "stickernet/error.hpp"
#include "stickernet/nn.hpp"
#include "support.hpp"

using namespace stickernet;
using namespace stickernet::nn;

namespace {

Tensor4 random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4 t(s);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor4& a, const Tensor4& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

/// Checks d(sum(r * f(x)))/dx and the parameter gradients against central differences.
/// `forward_backward` runs forward, then (when `dy` is non-empty) backward with dy and returns dx.
void check_layer(ModelParams& params, Tensor4 x, const std::function<Tensor4(const Tensor4&)>& forward,
                 const std::function<Tensor4(const Tensor4&, const Tensor4&)>& backward, Rng& rng,
                 double step = 1e-4) {
    const Tensor4 y = forward(x);
    const Tensor4 r = random_tensor(y.shape(), rng);
    params.zero_grad();
    const Tensor4 dx = backward(x, r);
    REQUIRE(dx.shape() == x.shape());

    auto objective = [&]() { return dot(forward(x), r); };
    for (std::size_t i = 0; i < x.size(); i += 1 + x.size() / 40) {
        const double keep = x.data()[i];
        x.data()[i] = keep + step;
        const double up = objective();
        x.data()[i] = keep - step;
        const double down = objective();
        x.data()[i] = keep;
        CHECK(support::relative_error(dx.data()[i], (up - down) / (2 * step), 1e-4) < 1e-3);
    }
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); i += 1 + p.value.size() / 25) {
            const double keep = p.value[i];
            p.value[i] = keep + step;
            const double up = objective();
            p.value[i] = keep - step;
            const double down = objective();
            p.value[i] = keep;
            INFO(p.name << "[" << i << "]");
            CHECK(support::relative_error(p.grad[i], (up - down) / (2 * step), 1e-4) < 1e-3);
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradient matches finite differences") {
    Rng rng(1);
    for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, std::tuple{3, 2, 1}, std::tuple{1, 1, 0}, std::tuple{2, 2, 0}}) {
        ModelParams params;
        Conv2d conv(params, "c", 3, 4, k, stride, pad, rng);
        for (auto& p : params) {
            for (double& v : p.value) v = rng.uniform(-0.5, 0.5);
        }
        Conv2dCache cache;
        check_layer(
            params, random_tensor({2, 3, 8, 8}, rng), [&](const Tensor4& x) { return conv.forward(params, x); },
            [&](const Tensor4& x, const Tensor4& dy) {
                conv.forward(params, x, &cache);
                return conv.backward(params, cache, dy);
            },
            rng);
    }
}

TEST_CASE("linear gradient matches finite differences") {
    Rng rng(2);
    ModelParams params;
    Linear fc(params, "fc", 6, 5, rng);
    LinearCache cache;
    check_layer(
        params, random_tensor({3, 6, 1, 1}, rng), [&](const Tensor4& x) { return fc.forward(params, x); },
        [&](const Tensor4& x, const Tensor4& dy) {
            fc.forward(params, x, &cache);
            return fc.backward(params, cache, dy);
        },
        rng);
}

TEST_CASE("pooling and relu gradients match finite differences") {
    Rng rng(3);
    ModelParams none;
    check_layer(
        none, random_tensor({2, 3, 8, 8}, rng), [](const Tensor4& x) { return avg_pool2(x); },
        [](const Tensor4& x, const Tensor4& dy) { return avg_pool2_backward(x.shape(), dy); }, rng);
    check_layer(
        none, random_tensor({2, 3, 8, 8}, rng), [](const Tensor4& x) { return global_avg_pool(x); },
        [](const Tensor4& x, const Tensor4& dy) { return global_avg_pool_backward(x.shape(), dy); }, rng);
    // Keep inputs away from the kink at zero.
    Tensor4 x = random_tensor({2, 3, 8, 8}, rng, 0.1, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x.data()[i] = -x.data()[i];
    check_layer(
        none, x,
        [](const Tensor4& in) {
            Tensor4 y = in;
            relu_inplace(y);
            return y;
        },
        [](const Tensor4& in, const Tensor4& dy) {
            Tensor4 y = in;
            relu_inplace(y);
            return relu_backward(y, dy);
        },
        rng);
}

TEST_CASE("backbone gradient matches finite differences") {
    Rng rng(4);
    ModelParams params;
    BackboneSpec spec{3, {4, 6, 6}, {2, 2, 1}, {1, 2}, 1};
    Backbone net(params, "bb", spec, rng);
    const Tensor4 x = random_tensor({2, 3, 8, 8}, rng);
    BackboneCache cache;
    const auto out = net.forward(params, x, &cache);
    std::vector<Tensor4> rt;
    for (const auto& t : out.taps) rt.push_back(random_tensor(t.shape(), rng));
    const Tensor4 rg = random_tensor(out.global.shape(), rng);

    auto objective = [&](const Tensor4& in) {
        const auto o = net.forward(params, in);
        double s = dot(o.global, rg);
        for (std::size_t i = 0; i < o.taps.size(); ++i) s += dot(o.taps[i], rt[i]);
        return s;
    };
    params.zero_grad();
    const Tensor4 dx = net.backward(params, cache, rt, rg);
    const double step = 1e-5;
    Tensor4 probe = x;
    for (std::size_t i = 0; i < x.size(); i += 7) {
        probe.data()[i] = x.data()[i] + step;
        const double up = objective(probe);
        probe.data()[i] = x.data()[i] - step;
        const double down = objective(probe);
        probe.data()[i] = x.data()[i];
        CHECK(support::relative_error(dx.data()[i], (up - down) / (2 * step), 1e-4) < 1e-3);
    }
    for (auto& p : params) {
        for (std::size_t i = 0; i < p.value.size(); i += 1 + p.value.size() / 10) {
            const double keep = p.value[i];
            p.value[i] = keep + step;
            const double up = objective(x);
            p.value[i] = keep - step;
            const double down = objective(x);
            p.value[i] = keep;
            INFO(p.name);
            CHECK(support::relative_error(p.grad[i], (up - down) / (2 * step), 1e-4) < 1e-3);
        }
    }
}

TEST_CASE("backbone shapes, determinism and zero behavior") {
    BackboneSpec spec{5, {16, 32, 32, 32}, {2, 2, 2, 2}, {2, 3}, 1};
    CHECK(spec.tap_resolutions(64) == std::vector<int>{8, 4});
    CHECK(spec.tap_resolutions(256) == std::vector<int>{32, 16});

    Rng a_rng(42);
    Rng b_rng(42);
    ModelParams pa(42);
    ModelParams pb(42);
    Backbone a(pa, "h", spec, a_rng);
    Backbone b(pb, "h", spec, b_rng);
    Rng in_rng(9);
    const Tensor4 x = random_tensor({1, 5, 64, 64}, in_rng, 0.0, 1.0);
    const auto oa = a.forward(pa, x);
    const auto ob = b.forward(pb, x);
    REQUIRE(oa.taps.size() == 2);
    CHECK(oa.taps[0].shape() == Shape{1, 32, 8, 8});
    CHECK(oa.taps[1].shape() == Shape{1, 32, 4, 4});
    CHECK(oa.global.shape() == Shape{1, 32, 1, 1});
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::equal(oa.taps[i].data().begin(), oa.taps[i].data().end(), ob.taps[i].data().begin()));
    }

    for (auto& p : pa) std::fill(p.value.begin(), p.value.end(), 0.0);
    const auto zero = a.forward(pa, Tensor4({1, 5, 64, 64}));
    for (const auto& t : zero.taps) {
        for (double v : t.data()) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(a.forward(pa, Tensor4({1, 4, 64, 64})), InputError);
    CHECK_THROWS_AS(a.backward(pa, BackboneCache{}, {Tensor4{}, Tensor4{}}, Tensor4{}), StateError);
}

TEST_CASE("layers refuse backward without a forward cache") {
    Rng rng(1);
    ModelParams params;
    Conv2d conv(params, "c", 1, 1, 3, 1, 1, rng);
    Linear fc(params, "l", 2, 2, rng);
    CHECK_THROWS_AS(conv.backward(params, Conv2dCache{}, Tensor4({1, 1, 4, 4})), StateError);
    CHECK_THROWS_AS(fc.backward(params, LinearCache{}, Tensor4({1, 2, 1, 1})), StateError);
}

TEST_CASE("bce examples") {
    CHECK(bce(0.5, 1.0) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(bce(1.0 - 1e-7, 1.0) == doctest::Approx(1e-7).epsilon(1e-3));
    CHECK(bce(1e-7, 1.0) == doctest::Approx(16.118).epsilon(1e-4));
    CHECK(bce(0.0, 1.0) == bce(1e-7, 1.0));
    CHECK(bce(0.3, 0.0) == doctest::Approx(-std::log(0.7)));
    CHECK(bce_grad(0.25, 1.0) == doctest::Approx(-4.0));
    CHECK(bce_grad(0.0, 1.0) == 0.0);
}

TEST_CASE("sgd examples") {
    auto scalar = [](double w, double g) {
        ModelParams p;
        p.add("w", {1});
        p[0].value[0] = w;
        p[0].grad[0] = g;
        return p;
    };
    {
        auto p = scalar(1.0, 2.0);
        SgdMomentum opt(0.0, 0.9);
        opt.step(p);
        CHECK(p[0].value[0] == 1.0);
        CHECK(p[0].grad[0] == 0.0);
    }
    {
        auto p = scalar(1.0, 2.0);
        SgdMomentum opt(0.1, 0.0);
        opt.step(p);
        CHECK(p[0].value[0] == doctest::Approx(0.8).epsilon(1e-7));
    }
    {
        // Powers of two keep float rounding out of the comparison.
        auto p = scalar(1.0, 0.5);
        SgdMomentum opt(0.125, 0.9);
        opt.step(p);
        const double first = 1.0 - p[0].value[0];
        p[0].grad[0] = 0.5;
        const double before = p[0].value[0];
        opt.step(p);
        const double second = before - p[0].value[0];
        CHECK(second / first == doctest::Approx(1.9).epsilon(1e-6));
    }
    {
        auto p = scalar(1.0, std::nan(""));
        SgdMomentum opt(0.1, 0.9);
        try {
            opt.step(p);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("w") != std::string::npos);
        }
        CHECK(p[0].value[0] == 1.0);
    }
}

TEST_CASE("parameters stay float32-representable") {
    Rng rng(6);
    ModelParams params;
    Linear fc(params, "fc", 7, 3, rng);
    for (auto& p : params) {
        for (double& g : p.grad) g = rng.uniform(-1, 1);
    }
    SgdMomentum opt(0.0123, 0.9);
    opt.step(params);
    for (const auto& p : params) {
        for (double v : p.value) CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
    CHECK_THROWS_AS(params.add("fc.weight", {1}), InputError);
}

TEST_CASE("overfitting one example decreases the loss monotonically") {
    Rng rng(12);
    ModelParams params;
    BackboneSpec spec{3, {8, 8}, {2, 2}, {1}, 1};
    Backbone net(params, "bb", spec, rng);
    Linear head(params, "head", 8, 1, rng);
    const Tensor4 x = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    SgdMomentum opt(0.05, 0.0);
    double prev = 1e9;
    for (int step = 0; step < 10; ++step) {
        BackboneCache bc;
        LinearCache lc;
        const auto f = net.forward(params, x, &bc);
        const Tensor4 z = head.forward(params, f.global, &lc);
        const double p = sigmoid(z.at(0, 0, 0, 0));
        const double loss = bce(p, 1.0);
        CHECK(loss < prev);
        prev = loss;
        Tensor4 dz({1, 1, 1, 1});
        dz.at(0, 0, 0, 0) = bce_grad(p, 1.0) * p * (1 - p);
        const Tensor4 dg = head.backward(params, lc, dz);
        net.backward(params, bc, {Tensor4{}}, dg);
        opt.step(params);
    }
}
