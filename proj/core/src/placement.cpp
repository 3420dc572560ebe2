#include "stickernet/placement.hpp"

#include <algorithm>
#include <cmath>

#include "stickernet/error.hpp"

namespace stickernet::placement {

using geometry::AnchorGrid;
using geometry::Box;
using geometry::RegressionTarget;

HostInput make_host_input(const Image& host, const Image& mask, int size) {
    if (host.empty() || mask.empty()) throw InputError("make_host_input: empty host or mask");
    if (host.width != mask.width || host.height != mask.height) {
        throw InputError("make_host_input: mask dimensions must equal host dimensions");
    }
    HostInput in;
    in.rgba = nn::Tensor4(nn::Shape{1, 4, size, size});
    in.fg_mask = nn::Tensor4(nn::Shape{1, 1, size, size});
    write_to_tensor(resize_bilinear(to_rgba(host), size, size), in.rgba, 0, 0);
    write_to_tensor(resize_bilinear(to_gray(mask), size, size), in.fg_mask, 0, 0);
    return in;
}

classifier::StickerInput make_placement_sticker(const Image& sticker, int size) {
    if (sticker.empty()) throw InputError("make_placement_sticker: empty sticker");
    classifier::StickerInput in;
    in.has_alpha = sticker.has_alpha();
    in.aspect_feature = geometry::aspect_ratio_feature(sticker.width, sticker.height);
    in.rgba = nn::Tensor4(nn::Shape{1, 4, size, size});
    write_to_tensor(letterbox(sticker, size), in.rgba, 0, 0);
    return in;
}

std::vector<geometry::GridScale> PlacementConfig::grid_scales() const {
    std::vector<geometry::GridScale> scales;
    for (int side : host_backbone.tap_resolutions(input_size)) scales.push_back({side, side});
    return scales;
}

PlacementOutput decode_output(const AnchorGrid& grid, PlacementRaw raw) {
    if (raw.confidences.size() != grid.size() || raw.targets.size() != grid.size()) {
        throw InputError("decode_output: output size does not match anchor grid");
    }
    PlacementOutput out;
    out.chosen = static_cast<std::size_t>(
        std::max_element(raw.confidences.begin(), raw.confidences.end()) - raw.confidences.begin());
    out.box = geometry::decode_placement(grid, out.chosen, raw.targets[out.chosen]);
    out.confidences = std::move(raw.confidences);
    out.targets = std::move(raw.targets);
    return out;
}

PlacementLoss placement_loss(std::span<const double> confidences, std::span<const RegressionTarget> targets,
                             const AnchorGrid& grid, const Box& gt, double lambda, RegressionLoss kind) {
    if (confidences.size() != grid.size() || targets.size() != grid.size()) {
        throw InputError("placement_loss: output size does not match anchor grid");
    }
    if (!gt.valid()) throw InputError("placement_loss: invalid ground-truth box");

    PlacementLoss L;
    L.positives = geometry::assign_positives(grid, gt);
    if (std::none_of(L.positives.begin(), L.positives.end(), [](bool b) { return b; })) {
        L.positives[geometry::nearest_anchor(grid, gt)] = true;
        L.used_fallback = true;
    }

    const auto n = static_cast<double>(grid.size());
    L.d_confidences.assign(grid.size(), 0.0);
    L.d_targets.assign(grid.size(), RegressionTarget{0.0, 0.0, 0.0, 0.0});
    double bce_sum = 0.0;
    std::size_t positive_count = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double y = L.positives[i] ? 1.0 : 0.0;
        bce_sum += nn::bce(confidences[i], y);
        L.d_confidences[i] = nn::bce_grad(confidences[i], y) / n;
        if (L.positives[i]) ++positive_count;
    }
    L.classification = bce_sum / n;

    const auto npos = static_cast<double>(positive_count);
    double reg_sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!L.positives[i]) continue;
        const Box b = geometry::decode_placement(grid, i, targets[i]);
        geometry::BoxGrad g{};
        if (kind == RegressionLoss::diou) {
            reg_sum += 1.0 - geometry::diou(b, gt);
            g = geometry::diou_grad(b, gt);
        } else {
            reg_sum += 1.0 - geometry::iou(b, gt);
            g = geometry::iou_grad(b, gt);
        }
        const double scale = -lambda / npos;
        for (double& v : g) v *= scale;
        L.d_targets[i] = geometry::decode_placement_backward(grid, i, targets[i], g);
    }
    L.regression = reg_sum / npos;
    L.total = L.classification + lambda * L.regression;
    return L;
}

// ---------------------------------------------------------------------------

struct PlacementPredictor::Forward {
    nn::BackboneCache host;
    nn::BackboneCache sticker;
    nn::Shape host_global_shape;
    nn::Shape sticker_global_shape;
    struct Scale {
        nn::Conv2dCache conf0, conf1, reg0, reg1;
        nn::Tensor4 conf_hidden, reg_hidden;
        int tap_channels = 0;
    };
    std::vector<Scale> scales;
    std::vector<std::vector<double>> raw_probs;
};

PlacementPredictor::PlacementPredictor(PlacementConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(seed), grid_(config_.grid_scales()) {
    if (config_.host_backbone.input_channels != 5) throw InputError("placement host backbone must take 5 channels");
    if (config_.sticker_backbone.input_channels != 4) {
        throw InputError("placement sticker backbone must take 4 channels");
    }
    if (config_.head_hidden < 1) throw InputError("placement head_hidden must be >= 1");
    if (!(config_.lambda >= 0.0)) throw InputError("placement lambda must be >= 0");

    Rng rng(seed);
    host_backbone_ = nn::Backbone(params_, "placement.host", config_.host_backbone, rng);
    sticker_backbone_ = nn::Backbone(params_, "placement.sticker", config_.sticker_backbone, rng);
    const int context = config_.host_backbone.global_width() + config_.sticker_backbone.global_width();
    for (std::size_t s = 0; s < config_.host_backbone.taps.size(); ++s) {
        const int in = config_.host_backbone.widths[config_.host_backbone.taps[s]] + context;
        const std::string p = "placement.head" + std::to_string(s);
        Head h;
        h.conf0 = nn::Conv2d(params_, p + ".conf0", in, config_.head_hidden, 1, 1, 0, rng);
        h.conf1 = nn::Conv2d(params_, p + ".conf1", config_.head_hidden, 1, 1, 1, 0, rng);
        h.reg0 = nn::Conv2d(params_, p + ".reg0", in, config_.head_hidden, 1, 1, 0, rng);
        h.reg1 = nn::Conv2d(params_, p + ".reg1", config_.head_hidden, 4, 1, 1, 0, rng);
        // Output layers start small: low prior confidence, boxes near a quarter of the host side.
        for (std::size_t idx : {h.conf1.weight_index(), h.reg1.weight_index()}) {
            for (double& v : params_[idx].value) v *= 0.1;
            nn::round_to_float(params_[idx].value);
        }
        params_[h.conf1.bias_index()].value[0] = static_cast<float>(-2.0);
        params_[h.reg1.bias_index()].value[2] = static_cast<float>(std::log(0.25));
        params_[h.reg1.bias_index()].value[3] = static_cast<float>(std::log(0.25));
        heads_.push_back(h);
    }
}

namespace {

void check_batch(std::span<const HostInput> hosts, std::span<const classifier::StickerInput> stickers, int size) {
    if (hosts.empty() || hosts.size() != stickers.size()) {
        throw InputError("placement: host and sticker batches must be non-empty and of equal size");
    }
    for (const auto& h : hosts) {
        if (h.rgba.shape() != nn::Shape{1, 4, size, size} || h.fg_mask.shape() != nn::Shape{1, 1, size, size}) {
            throw InputError("placement: host input must be 4+1 channels at " + std::to_string(size) + "x" +
                             std::to_string(size));
        }
    }
    for (const auto& s : stickers) {
        if (s.rgba.shape() != nn::Shape{1, 4, size, size}) {
            throw InputError("placement: sticker input must be 4 channels at " + std::to_string(size) + "x" +
                             std::to_string(size));
        }
    }
}

}  // namespace

std::vector<PlacementRaw> PlacementPredictor::forward(std::span<const HostInput> hosts,
                                                      std::span<const classifier::StickerInput> stickers,
                                                      Forward* cache) const {
    const int size = config_.input_size;
    check_batch(hosts, stickers, size);
    const int n = static_cast<int>(hosts.size());
    const std::size_t plane = static_cast<std::size_t>(size) * size;

    nn::Tensor4 hx(nn::Shape{n, 5, size, size});
    nn::Tensor4 sx(nn::Shape{n, 4, size, size});
    for (int i = 0; i < n; ++i) {
        std::copy(hosts[i].rgba.raw(), hosts[i].rgba.raw() + 4 * plane, hx.plane(i, 0));
        std::copy(hosts[i].fg_mask.raw(), hosts[i].fg_mask.raw() + plane, hx.plane(i, 4));
        std::copy(stickers[i].rgba.raw(), stickers[i].rgba.raw() + 4 * plane, sx.plane(i, 0));
    }

    const auto hf = host_backbone_.forward(params_, hx, cache ? &cache->host : nullptr);
    const auto sf = sticker_backbone_.forward(params_, sx, cache ? &cache->sticker : nullptr);
    const int gh = hf.global.shape().c;
    const int gs = sf.global.shape().c;
    if (cache != nullptr) {
        cache->host_global_shape = hf.global.shape();
        cache->sticker_global_shape = sf.global.shape();
        cache->scales.assign(heads_.size(), {});
    }

    std::vector<PlacementRaw> out(static_cast<std::size_t>(n));
    for (auto& o : out) {
        o.confidences.assign(grid_.size(), 0.0);
        o.targets.assign(grid_.size(), RegressionTarget{});
    }

    for (std::size_t s = 0; s < heads_.size(); ++s) {
        const nn::Tensor4& tap = hf.taps[s];
        const nn::Shape ts = tap.shape();
        nn::Tensor4 fused(nn::Shape{n, ts.c + gh + gs, ts.h, ts.w});
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < ts.c; ++c) std::copy(tap.plane(i, c), tap.plane(i, c) + ts.plane(), fused.plane(i, c));
            for (int c = 0; c < gh; ++c) {
                double* p = fused.plane(i, ts.c + c);
                std::fill(p, p + ts.plane(), hf.global.at(i, c, 0, 0));
            }
            for (int c = 0; c < gs; ++c) {
                double* p = fused.plane(i, ts.c + gh + c);
                std::fill(p, p + ts.plane(), sf.global.at(i, c, 0, 0));
            }
        }

        Forward::Scale* sc = cache ? &cache->scales[s] : nullptr;
        if (sc != nullptr) sc->tap_channels = ts.c;
        const Head& head = heads_[s];
        nn::Tensor4 ch = head.conf0.forward(params_, fused, sc ? &sc->conf0 : nullptr);
        nn::relu_inplace(ch);
        const nn::Tensor4 logits = head.conf1.forward(params_, ch, sc ? &sc->conf1 : nullptr);
        nn::Tensor4 rh = head.reg0.forward(params_, fused, sc ? &sc->reg0 : nullptr);
        nn::relu_inplace(rh);
        const nn::Tensor4 reg = head.reg1.forward(params_, rh, sc ? &sc->reg1 : nullptr);
        if (sc != nullptr) {
            sc->conf_hidden = std::move(ch);
            sc->reg_hidden = std::move(rh);
        }

        const std::size_t offset = grid_.scale_offset(s);
        for (int i = 0; i < n; ++i) {
            for (int y = 0; y < ts.h; ++y) {
                for (int x = 0; x < ts.w; ++x) {
                    const std::size_t a = offset + static_cast<std::size_t>(y) * ts.w + x;
                    out[i].confidences[a] = nn::sigmoid(logits.at(i, 0, y, x));
                    out[i].targets[a] =
                        RegressionTarget{reg.at(i, 0, y, x), reg.at(i, 1, y, x), reg.at(i, 2, y, x), reg.at(i, 3, y, x)};
                }
            }
        }
    }
    for (const auto& o : out) {
        for (std::size_t a = 0; a < grid_.size(); ++a) {
            const auto& t = o.targets[a];
            if (!std::isfinite(o.confidences[a]) || !std::isfinite(t.dx) || !std::isfinite(t.dy) ||
                !std::isfinite(t.sw) || !std::isfinite(t.sh)) {
                throw NumericError("placement forward produced non-finite outputs");
            }
        }
    }
    return out;
}

std::vector<PlacementRaw> PlacementPredictor::forward_raw(std::span<const HostInput> hosts,
                                                          std::span<const classifier::StickerInput> stickers) const {
    return forward(hosts, stickers, nullptr);
}

PlacementOutput PlacementPredictor::predict(const HostInput& host, const classifier::StickerInput& sticker) const {
    auto raw = forward(std::span(&host, 1), std::span(&sticker, 1), nullptr);
    return decode_output(grid_, std::move(raw.front()));
}

double PlacementPredictor::loss_and_grad(std::span<const HostInput> hosts,
                                         std::span<const classifier::StickerInput> stickers,
                                         std::span<const Box> gts) {
    if (gts.size() != hosts.size()) throw InputError("placement loss_and_grad: one gt box per sample required");
    Forward cache;
    const auto raw = forward(hosts, stickers, &cache);
    const int n = static_cast<int>(hosts.size());
    const double inv = 1.0 / n;

    double total = 0.0;
    std::vector<PlacementLoss> losses;
    losses.reserve(raw.size());
    for (int i = 0; i < n; ++i) {
        losses.push_back(placement_loss(raw[i].confidences, raw[i].targets, grid_, gts[i], config_.lambda,
                                        config_.regression));
        total += losses.back().total;
    }

    const int gh = cache.host_global_shape.c;
    const int gs = cache.sticker_global_shape.c;
    nn::Tensor4 d_host_global(cache.host_global_shape);
    nn::Tensor4 d_sticker_global(cache.sticker_global_shape);
    std::vector<nn::Tensor4> tap_grads(heads_.size());

    for (std::size_t s = 0; s < heads_.size(); ++s) {
        const auto& sc = cache.scales[s];
        const auto& gsc = grid_.scales()[s];
        const std::size_t offset = grid_.scale_offset(s);
        nn::Tensor4 dlogits(nn::Shape{n, 1, gsc.rows, gsc.cols});
        nn::Tensor4 dreg(nn::Shape{n, 4, gsc.rows, gsc.cols});
        for (int i = 0; i < n; ++i) {
            for (int y = 0; y < gsc.rows; ++y) {
                for (int x = 0; x < gsc.cols; ++x) {
                    const std::size_t a = offset + static_cast<std::size_t>(y) * gsc.cols + x;
                    const double p = raw[i].confidences[a];
                    dlogits.at(i, 0, y, x) = losses[i].d_confidences[a] * p * (1.0 - p) * inv;
                    const auto& dt = losses[i].d_targets[a];
                    dreg.at(i, 0, y, x) = dt.dx * inv;
                    dreg.at(i, 1, y, x) = dt.dy * inv;
                    dreg.at(i, 2, y, x) = dt.sw * inv;
                    dreg.at(i, 3, y, x) = dt.sh * inv;
                }
            }
        }
        const Head& head = heads_[s];
        nn::Tensor4 g = head.conf1.backward(params_, sc.conf1, dlogits);
        g = nn::relu_backward(sc.conf_hidden, g);
        nn::Tensor4 dfused = head.conf0.backward(params_, sc.conf0, g);
        g = head.reg1.backward(params_, sc.reg1, dreg);
        g = nn::relu_backward(sc.reg_hidden, g);
        const nn::Tensor4 dfused_reg = head.reg0.backward(params_, sc.reg0, g);
        {
            auto a = dfused.data();
            const auto b = dfused_reg.data();
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        }

        const nn::Shape fs = dfused.shape();
        nn::Tensor4 dtap(nn::Shape{n, sc.tap_channels, fs.h, fs.w});
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < sc.tap_channels; ++c) {
                std::copy(dfused.plane(i, c), dfused.plane(i, c) + fs.plane(), dtap.plane(i, c));
            }
            for (int c = 0; c < gh + gs; ++c) {
                const double* p = dfused.plane(i, sc.tap_channels + c);
                double sum = 0.0;
                for (std::size_t k = 0; k < fs.plane(); ++k) sum += p[k];
                if (c < gh) {
                    d_host_global.at(i, c, 0, 0) += sum;
                } else {
                    d_sticker_global.at(i, c - gh, 0, 0) += sum;
                }
            }
        }
        tap_grads[s] = std::move(dtap);
    }

    host_backbone_.backward(params_, cache.host, tap_grads, d_host_global);
    std::vector<nn::Tensor4> no_taps(config_.sticker_backbone.taps.size());
    sticker_backbone_.backward(params_, cache.sticker, no_taps, d_sticker_global);
    return total * inv;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kEvalBatch = 32;

void build_inputs(std::span<const PlacementSample> samples, std::span<const std::size_t> idx, int size,
                  std::vector<HostInput>& hosts, std::vector<classifier::StickerInput>& stickers,
                  std::vector<Box>& gts) {
    hosts.clear();
    stickers.clear();
    gts.clear();
    for (std::size_t k : idx) {
        const auto& s = samples[k];
        hosts.push_back(make_host_input(*s.host, *s.mask, size));
        stickers.push_back(make_placement_sticker(*s.sticker, size));
        gts.push_back(s.gt);
    }
}

}  // namespace

double mean_diou(const PlacementPredictor& model, std::span<const PlacementSample> samples) {
    if (samples.empty()) return 0.0;
    std::vector<HostInput> hosts;
    std::vector<classifier::StickerInput> stickers;
    std::vector<Box> gts;
    double sum = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
        std::vector<std::size_t> idx;
        for (std::size_t k = start; k < std::min(samples.size(), start + kEvalBatch); ++k) idx.push_back(k);
        build_inputs(samples, idx, model.config().input_size, hosts, stickers, gts);
        auto raw = model.forward_raw(hosts, stickers);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const auto out = decode_output(model.grid(), std::move(raw[i]));
            sum += geometry::diou(out.box, gts[i]);
        }
    }
    return sum / static_cast<double>(samples.size());
}

std::vector<EpochMetrics> train_placement(PlacementPredictor& model, nn::SgdMomentum& optimizer,
                                          std::span<const PlacementSample> train,
                                          std::span<const PlacementSample> val, const TrainConfig& config,
                                          const EpochCallback& on_epoch) {
    if (train.empty()) throw InputError("train_placement: empty training set");
    if (config.batch_size < 1) throw InputError("train_placement: batch_size must be >= 1");

    std::vector<HostInput> hosts;
    std::vector<classifier::StickerInput> stickers;
    std::vector<Box> gts;
    std::vector<EpochMetrics> history;
    for (int epoch = config.start_epoch; epoch < config.end_epoch(); ++epoch) {
        optimizer.set_learning_rate(config.lr_at(epoch));
        const auto order = epoch_order(train.size(), config.seed, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            build_inputs(train, std::span(order).subspan(start, end - start), model.config().input_size, hosts,
                         stickers, gts);
            const double loss = model.loss_and_grad(hosts, stickers, gts);
            if (!std::isfinite(loss)) throw NumericError("placement loss became non-finite");
            optimizer.step(model.params());
            loss_sum += loss;
            ++batches;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.lr = optimizer.learning_rate();
        m.train_loss = loss_sum / static_cast<double>(batches);
        m.train_metric = 0.0;
        m.val_metric = val.empty() ? 0.0 : mean_diou(model, val);
        history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return history;
}

}  // namespace stickernet::placement
