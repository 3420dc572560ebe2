#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stickernet/rng.hpp"

// Minimal differentiable network substrate. Activations are double
// precision; parameters are stored as doubles but kept float32-representable
// (see ModelParams) so weight files round-trip bit-exactly.
namespace stickernet::nn {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// (batch, channels, height, width) tensor, row-major.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape shape, double fill = 0.0);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    double* raw() { return data_.data(); }
    const double* raw() const { return data_.data(); }

    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    /// Pointer to the (n, c) plane.
    double* plane(int n, int c) { return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane(); }
    const double* plane(int n, int c) const {
        return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
    }

    void fill(double v);
    bool all_finite() const;

private:
    Shape shape_{};
    std::vector<double> data_;
};

struct Parameter {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> value;
    std::vector<double> grad;
};

/// Named learnable weights with same-shaped gradient buffers.
///
/// Values are rounded to float32 after initialization, loading and every
/// optimizer step, so persisting them as 32-bit scalars is lossless.
class ModelParams {
public:
    explicit ModelParams(std::uint64_t seed = 0) : seed_(seed) {}

    /// Registers a zero-initialized parameter; names must be unique.
    std::size_t add(const std::string& name, std::vector<std::uint32_t> dims);

    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::uint64_t seed() const { return seed_; }

    const Parameter* find(const std::string& name) const;
    Parameter* find(const std::string& name);

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    std::size_t scalar_count() const;

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t seed_ = 0;
};

/// Rounds every value to the nearest float32.
void round_to_float(std::span<double> values);

/// Fan-in scaled uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void init_fan_in_uniform(Parameter& p, std::size_t fan_in, Rng& rng, double gain = 1.0);

// ---------------------------------------------------------------------------
// Layers. Each layer records what backward needs in a caller-owned cache so
// inference with frozen parameters never mutates shared state.

struct Conv2dCache {
    Shape input_shape{};
    std::vector<double> columns;  // im2col buffer, (C*k*k) x (N*Ho*Wo)
    bool valid = false;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ModelParams& params, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
           int pad, Rng& rng);

    Tensor4 forward(const ModelParams& params, const Tensor4& x, Conv2dCache* cache = nullptr) const;
    /// Accumulates parameter gradients and returns d(loss)/d(input).
    Tensor4 backward(ModelParams& params, const Conv2dCache& cache, const Tensor4& dy) const;

    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }
    std::size_t weight_index() const { return weight_; }
    std::size_t bias_index() const { return bias_; }

private:
    int in_channels_ = 0;
    int out_channels_ = 0;
    int kernel_ = 1;
    int stride_ = 1;
    int pad_ = 0;
    std::size_t weight_ = 0;
    std::size_t bias_ = 0;
};

struct LinearCache {
    Tensor4 input;
    bool valid = false;
};

/// Fully connected layer over (n, in, 1, 1) tensors.
class Linear {
public:
    Linear() = default;
    Linear(ModelParams& params, const std::string& name, int in_features, int out_features, Rng& rng,
           double gain = 1.0);

    Tensor4 forward(const ModelParams& params, const Tensor4& x, LinearCache* cache = nullptr) const;
    Tensor4 backward(ModelParams& params, const LinearCache& cache, const Tensor4& dy) const;

    int in_features() const { return in_; }
    int out_features() const { return out_; }
    std::size_t weight_index() const { return weight_; }
    std::size_t bias_index() const { return bias_; }

private:
    int in_ = 0;
    int out_ = 0;
    std::size_t weight_ = 0;
    std::size_t bias_ = 0;
};

void relu_inplace(Tensor4& x);
/// d(loss)/d(input) given the ReLU output and d(loss)/d(output).
Tensor4 relu_backward(const Tensor4& output, const Tensor4& dy);

/// Spatial mean: (n, c, h, w) -> (n, c, 1, 1).
Tensor4 global_avg_pool(const Tensor4& x);
Tensor4 global_avg_pool_backward(const Shape& input_shape, const Tensor4& dy);

/// 2x2 average pooling with stride 2 (odd trailing rows/cols dropped).
Tensor4 avg_pool2(const Tensor4& x);
Tensor4 avg_pool2_backward(const Shape& input_shape, const Tensor4& dy);

double sigmoid(double z);

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy on a probability clamped to [1e-7, 1 - 1e-7].
double bce(double p, double y);
/// d bce / d p, zero where the clamp is active.
double bce_grad(double p, double y);

// ---------------------------------------------------------------------------

/// Classic momentum SGD: v <- momentum * v + g; w <- w - lr * v.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    /// Applies one update and zeroes gradients. Throws NumericError naming the
    /// first parameter with a non-finite gradient (no parameter is modified).
    void step(ModelParams& params);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    double momentum() const { return momentum_; }

    /// Velocity buffers in parameter order (empty until the first step).
    std::vector<std::vector<double>>& velocity() { return velocity_; }
    const std::vector<std::vector<double>>& velocity() const { return velocity_; }

private:
    double lr_;
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

}  // namespace stickernet::nn
