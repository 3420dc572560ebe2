#include "stickernet/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "stickernet/error.hpp"

namespace stickernet::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << '(' << s.n << ", " << s.c << ", " << s.h << ", " << s.w << ')';
    return os.str();
}

Tensor4::Tensor4(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw InputError("Tensor4: negative dimension " + to_string(shape));
    }
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor4::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t ModelParams::add(const std::string& name, std::vector<std::uint32_t> dims) {
    if (index_.count(name) != 0) throw InputError("duplicate parameter name: " + name);
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    Parameter p{name, std::move(dims), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    params_.push_back(std::move(p));
    index_.emplace(name, params_.size() - 1);
    return params_.size() - 1;
}

const Parameter* ModelParams::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ModelParams::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

void ModelParams::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void round_to_float(std::span<double> values) {
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

void init_fan_in_uniform(Parameter& p, std::size_t fan_in, Rng& rng, double gain) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (double& v : p.value) v = rng.uniform(-bound, bound);
    round_to_float(p.value);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(ModelParams& params, const std::string& name, int in_channels, int out_channels, int kernel,
               int stride, int pad, Rng& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 || pad < 0) {
        throw InputError("Conv2d " + name + ": invalid geometry");
    }
    const auto k = static_cast<std::uint32_t>(kernel);
    weight_ = params.add(name + ".weight", {static_cast<std::uint32_t>(out_channels),
                                            static_cast<std::uint32_t>(in_channels), k, k});
    bias_ = params.add(name + ".bias", {static_cast<std::uint32_t>(out_channels)});
    init_fan_in_uniform(params[weight_], static_cast<std::size_t>(in_channels) * kernel * kernel, rng);
}

namespace {

// Fills columns (K rows, total_cols columns) for batch item n starting at column offset.
void im2col(const Tensor4& x, int n, int kernel, int stride, int pad, int ho, int wo, double* columns,
            std::size_t total_cols, std::size_t col_offset) {
    const Shape& s = x.shape();
    for (int c = 0; c < s.c; ++c) {
        const double* src = x.plane(n, c);
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const std::size_t row = (static_cast<std::size_t>(c) * kernel + ky) * kernel + kx;
                double* dst = columns + row * total_cols + col_offset;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    double* drow = dst + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= s.h) {
                        std::fill(drow, drow + wo, 0.0);
                        continue;
                    }
                    const double* srow = src + static_cast<std::size_t>(iy) * s.w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        drow[ox] = (ix >= 0 && ix < s.w) ? srow[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* columns, std::size_t total_cols, std::size_t col_offset, int n, int kernel, int stride,
            int pad, int ho, int wo, Tensor4& dx) {
    const Shape& s = dx.shape();
    for (int c = 0; c < s.c; ++c) {
        double* dst = dx.plane(n, c);
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const std::size_t row = (static_cast<std::size_t>(c) * kernel + ky) * kernel + kx;
                const double* src = columns + row * total_cols + col_offset;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    const double* srow = src + static_cast<std::size_t>(oy) * wo;
                    double* drow = dst + static_cast<std::size_t>(iy) * s.w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < s.w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor4 Conv2d::forward(const ModelParams& params, const Tensor4& x, Conv2dCache* cache) const {
    const Shape& s = x.shape();
    if (s.c != in_channels_) {
        throw InputError("Conv2d: expected " + std::to_string(in_channels_) + " input channels, got " +
                         to_string(s));
    }
    const int ho = out_size(s.h);
    const int wo = out_size(s.w);
    if (ho < 1 || wo < 1) throw InputError("Conv2d: input too small " + to_string(s));

    const std::size_t k = static_cast<std::size_t>(in_channels_) * kernel_ * kernel_;
    const std::size_t p = static_cast<std::size_t>(ho) * wo;
    const std::size_t total = p * s.n;
    std::vector<double> columns(k * total);
    for (int n = 0; n < s.n; ++n) im2col(x, n, kernel_, stride_, pad_, ho, wo, columns.data(), total, p * n);

    ConstMatrixMap weight(params[weight_].value.data(), out_channels_, static_cast<Eigen::Index>(k));
    ConstMatrixMap cols(columns.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(total));
    RowMatrix out = weight * cols;
    const auto& bias = params[bias_].value;

    Tensor4 y(Shape{s.n, out_channels_, ho, wo});
    for (int n = 0; n < s.n; ++n) {
        for (int o = 0; o < out_channels_; ++o) {
            const double* src = out.data() + static_cast<std::size_t>(o) * total + p * n;
            double* dst = y.plane(n, o);
            for (std::size_t i = 0; i < p; ++i) dst[i] = src[i] + bias[o];
        }
    }
    if (cache != nullptr) {
        cache->input_shape = s;
        cache->columns = std::move(columns);
        cache->valid = true;
    }
    return y;
}

Tensor4 Conv2d::backward(ModelParams& params, const Conv2dCache& cache, const Tensor4& dy) const {
    if (!cache.valid) throw StateError("Conv2d::backward called without a forward cache");
    const Shape& s = cache.input_shape;
    const int ho = out_size(s.h);
    const int wo = out_size(s.w);
    if (dy.shape() != Shape{s.n, out_channels_, ho, wo}) {
        throw InputError("Conv2d::backward: gradient shape " + to_string(dy.shape()) + " does not match output");
    }
    const std::size_t k = static_cast<std::size_t>(in_channels_) * kernel_ * kernel_;
    const std::size_t p = static_cast<std::size_t>(ho) * wo;
    const std::size_t total = p * s.n;

    // Gather dy as (out_channels, N*P).
    RowMatrix grad_out(out_channels_, static_cast<Eigen::Index>(total));
    for (int n = 0; n < s.n; ++n) {
        for (int o = 0; o < out_channels_; ++o) {
            const double* src = dy.plane(n, o);
            std::copy(src, src + p, grad_out.data() + static_cast<std::size_t>(o) * total + p * n);
        }
    }

    ConstMatrixMap cols(cache.columns.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(total));
    MatrixMap dweight(params[weight_].grad.data(), out_channels_, static_cast<Eigen::Index>(k));
    dweight.noalias() += grad_out * cols.transpose();
    auto& dbias = params[bias_].grad;
    for (int o = 0; o < out_channels_; ++o) dbias[o] += grad_out.row(o).sum();

    ConstMatrixMap weight(params[weight_].value.data(), out_channels_, static_cast<Eigen::Index>(k));
    RowMatrix dcols = weight.transpose() * grad_out;

    Tensor4 dx(s);
    for (int n = 0; n < s.n; ++n) col2im(dcols.data(), total, p * n, n, kernel_, stride_, pad_, ho, wo, dx);
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ModelParams& params, const std::string& name, int in_features, int out_features, Rng& rng,
               double gain)
    : in_(in_features), out_(out_features) {
    if (in_features < 1 || out_features < 1) throw InputError("Linear " + name + ": invalid size");
    weight_ = params.add(name + ".weight",
                         {static_cast<std::uint32_t>(out_features), static_cast<std::uint32_t>(in_features)});
    bias_ = params.add(name + ".bias", {static_cast<std::uint32_t>(out_features)});
    init_fan_in_uniform(params[weight_], static_cast<std::size_t>(in_features), rng, gain);
}

Tensor4 Linear::forward(const ModelParams& params, const Tensor4& x, LinearCache* cache) const {
    const Shape& s = x.shape();
    if (static_cast<std::size_t>(s.c) * s.plane() != static_cast<std::size_t>(in_)) {
        throw InputError("Linear: expected " + std::to_string(in_) + " features, got " + to_string(s));
    }
    ConstMatrixMap weight(params[weight_].value.data(), out_, in_);
    ConstMatrixMap input(x.raw(), s.n, in_);
    Tensor4 y(Shape{s.n, out_, 1, 1});
    MatrixMap out(y.raw(), s.n, out_);
    out.noalias() = input * weight.transpose();
    const auto& bias = params[bias_].value;
    for (int n = 0; n < s.n; ++n) {
        for (int o = 0; o < out_; ++o) out(n, o) += bias[o];
    }
    if (cache != nullptr) {
        cache->input = x;
        cache->valid = true;
    }
    return y;
}

Tensor4 Linear::backward(ModelParams& params, const LinearCache& cache, const Tensor4& dy) const {
    if (!cache.valid) throw StateError("Linear::backward called without a forward cache");
    const int batch = cache.input.shape().n;
    if (dy.shape() != Shape{batch, out_, 1, 1}) throw InputError("Linear::backward: gradient shape mismatch");
    ConstMatrixMap grad_out(dy.raw(), batch, out_);
    ConstMatrixMap input(cache.input.raw(), batch, in_);
    MatrixMap dweight(params[weight_].grad.data(), out_, in_);
    dweight.noalias() += grad_out.transpose() * input;
    auto& dbias = params[bias_].grad;
    for (int o = 0; o < out_; ++o) dbias[o] += grad_out.col(o).sum();

    ConstMatrixMap weight(params[weight_].value.data(), out_, in_);
    Tensor4 dx(cache.input.shape());
    MatrixMap dinput(dx.raw(), batch, in_);
    dinput.noalias() = grad_out * weight;
    return dx;
}

// ---------------------------------------------------------------------------
// Activations, pooling, loss

void relu_inplace(Tensor4& x) {
    for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

Tensor4 relu_backward(const Tensor4& output, const Tensor4& dy) {
    if (output.shape() != dy.shape()) throw InputError("relu_backward: shape mismatch");
    Tensor4 dx(dy.shape());
    const auto out = output.data();
    const auto g = dy.data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = out[i] > 0.0 ? g[i] : 0.0;
    return dx;
}

Tensor4 global_avg_pool(const Tensor4& x) {
    const Shape& s = x.shape();
    Tensor4 y(Shape{s.n, s.c, 1, 1});
    const double inv = 1.0 / static_cast<double>(s.plane());
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double* p = x.plane(n, c);
            double sum = 0.0;
            for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
            y.at(n, c, 0, 0) = sum * inv;
        }
    }
    return y;
}

Tensor4 global_avg_pool_backward(const Shape& input_shape, const Tensor4& dy) {
    if (dy.shape() != Shape{input_shape.n, input_shape.c, 1, 1}) {
        throw InputError("global_avg_pool_backward: shape mismatch");
    }
    Tensor4 dx(input_shape);
    const double inv = 1.0 / static_cast<double>(input_shape.plane());
    for (int n = 0; n < input_shape.n; ++n) {
        for (int c = 0; c < input_shape.c; ++c) {
            const double g = dy.at(n, c, 0, 0) * inv;
            double* p = dx.plane(n, c);
            std::fill(p, p + input_shape.plane(), g);
        }
    }
    return dx;
}

Tensor4 avg_pool2(const Tensor4& x) {
    const Shape& s = x.shape();
    const int ho = s.h / 2;
    const int wo = s.w / 2;
    if (ho < 1 || wo < 1) throw InputError("avg_pool2: input too small " + to_string(s));
    Tensor4 y(Shape{s.n, s.c, ho, wo});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const double sum = x.at(n, c, 2 * oy, 2 * ox) + x.at(n, c, 2 * oy, 2 * ox + 1) +
                                       x.at(n, c, 2 * oy + 1, 2 * ox) + x.at(n, c, 2 * oy + 1, 2 * ox + 1);
                    y.at(n, c, oy, ox) = 0.25 * sum;
                }
            }
        }
    }
    return y;
}

Tensor4 avg_pool2_backward(const Shape& input_shape, const Tensor4& dy) {
    const int ho = input_shape.h / 2;
    const int wo = input_shape.w / 2;
    if (dy.shape() != Shape{input_shape.n, input_shape.c, ho, wo}) {
        throw InputError("avg_pool2_backward: shape mismatch");
    }
    Tensor4 dx(input_shape);
    for (int n = 0; n < input_shape.n; ++n) {
        for (int c = 0; c < input_shape.c; ++c) {
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const double g = 0.25 * dy.at(n, c, oy, ox);
                    dx.at(n, c, 2 * oy, 2 * ox) += g;
                    dx.at(n, c, 2 * oy, 2 * ox + 1) += g;
                    dx.at(n, c, 2 * oy + 1, 2 * ox) += g;
                    dx.at(n, c, 2 * oy + 1, 2 * ox + 1) += g;
                }
            }
        }
    }
    return dx;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce(double p, double y) {
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double bce_grad(double p, double y) {
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
    return -y / p + (1.0 - y) / (1.0 - p);
}

// ---------------------------------------------------------------------------

void SgdMomentum::step(ModelParams& params) {
    for (const auto& p : params) {
        for (double g : p.grad) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
        }
    }
    if (velocity_.size() != params.size()) {
        velocity_.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i].value.size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        auto& v = velocity_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            v[j] = static_cast<double>(static_cast<float>(momentum_ * v[j] + p.grad[j]));
            p.value[j] = static_cast<double>(static_cast<float>(p.value[j] - lr_ * v[j]));
            p.grad[j] = 0.0;
        }
    }
}

}  // namespace stickernet::nn
