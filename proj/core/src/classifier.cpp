#include "stickernet/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "stickernet/error.hpp"
#include "stickernet/geometry.hpp"

namespace stickernet::classifier {

StickerInput make_sticker_input(const Image& sticker, int input_size, int resize_size, Rng* crop_rng) {
    if (sticker.empty()) throw InputError("make_sticker_input: empty sticker image");
    if (input_size < 1 || resize_size < input_size) throw InputError("make_sticker_input: invalid sizes");
    StickerInput in;
    in.has_alpha = sticker.has_alpha();
    in.aspect_feature = geometry::aspect_ratio_feature(sticker.width, sticker.height);

    const Image resized = resize_bilinear(to_rgba(sticker), resize_size, resize_size);
    const int slack = resize_size - input_size;
    int x0 = slack / 2;
    int y0 = slack / 2;
    if (crop_rng != nullptr) {
        x0 = static_cast<int>(crop_rng->uniform_int(0, slack));
        y0 = static_cast<int>(crop_rng->uniform_int(0, slack));
    }
    const Image window = crop(resized, x0, y0, input_size, input_size);
    in.rgba = nn::Tensor4(nn::Shape{1, 4, input_size, input_size});
    write_to_tensor(window, in.rgba, 0, 0);
    return in;
}

double classifier_loss(const std::array<double, 3>& probs, const TypeLabels& labels) {
    double loss = nn::bce(probs[0], labels.is_filter ? 1.0 : 0.0);
    if (labels.is_filter) {
        loss += nn::bce(probs[1], labels.use_mask ? 1.0 : 0.0);
        loss += nn::bce(probs[2], labels.transparency ? 1.0 : 0.0);
    }
    return loss;
}

struct TypeClassifier::Forward {
    nn::BackboneCache backbone;
    std::array<nn::LinearCache, 3> linear;
    std::array<nn::Tensor4, 2> hidden;  // post-ReLU activations
    nn::Shape global_shape;
};

TypeClassifier::TypeClassifier(ClassifierConfig config, std::uint64_t seed)
    : config_(std::move(config)), params_(seed) {
    if (config_.backbone.input_channels != 4) throw InputError("classifier backbone must take 4 channels");
    Rng rng(seed);
    backbone_ = nn::Backbone(params_, "classifier.backbone", config_.backbone, rng);
    const int in = config_.backbone.global_width() + 2;
    mlp_[0] = nn::Linear(params_, "classifier.mlp0", in, config_.mlp_hidden, rng);
    mlp_[1] = nn::Linear(params_, "classifier.mlp1", config_.mlp_hidden, config_.mlp_hidden, rng);
    mlp_[2] = nn::Linear(params_, "classifier.mlp2", config_.mlp_hidden, 3, rng, 0.1);
}

namespace {

nn::Tensor4 stack_inputs(std::span<const StickerInput> batch, int size) {
    nn::Tensor4 x(nn::Shape{static_cast<int>(batch.size()), 4, size, size});
    const std::size_t per = static_cast<std::size_t>(4) * size * size;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i].rgba;
        if (t.shape() != nn::Shape{1, 4, size, size}) {
            throw InputError("classifier input must be (1, 4, " + std::to_string(size) + ", " +
                             std::to_string(size) + "), got " + nn::to_string(t.shape()));
        }
        std::copy(t.raw(), t.raw() + per, x.raw() + per * i);
    }
    return x;
}

}  // namespace

std::vector<std::array<double, 3>> TypeClassifier::forward(std::span<const StickerInput> batch,
                                                           Forward* cache) const {
    const nn::Tensor4 x = stack_inputs(batch, config_.input_size);
    const auto features = backbone_.forward(params_, x, cache ? &cache->backbone : nullptr);
    const int width = config_.backbone.global_width();
    const int n = static_cast<int>(batch.size());

    nn::Tensor4 joint(nn::Shape{n, width + 2, 1, 1});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < width; ++c) joint.at(i, c, 0, 0) = features.global.at(i, c, 0, 0);
        joint.at(i, width, 0, 0) = batch[i].has_alpha ? 1.0 : 0.0;
        joint.at(i, width + 1, 0, 0) = batch[i].aspect_feature;
    }
    if (cache != nullptr) cache->global_shape = features.global.shape();

    nn::Tensor4 h = mlp_[0].forward(params_, joint, cache ? &cache->linear[0] : nullptr);
    nn::relu_inplace(h);
    if (cache != nullptr) cache->hidden[0] = h;
    h = mlp_[1].forward(params_, h, cache ? &cache->linear[1] : nullptr);
    nn::relu_inplace(h);
    if (cache != nullptr) cache->hidden[1] = h;
    const nn::Tensor4 logits = mlp_[2].forward(params_, h, cache ? &cache->linear[2] : nullptr);

    std::vector<std::array<double, 3>> probs(batch.size());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) probs[i][k] = nn::sigmoid(logits.at(i, k, 0, 0));
    }
    return probs;
}

std::vector<double> TypeClassifier::feature_vector(const StickerInput& input) const {
    const auto features = backbone_.forward(params_, stack_inputs(std::span(&input, 1), config_.input_size));
    std::vector<double> v(features.global.data().begin(), features.global.data().end());
    v.push_back(input.has_alpha ? 1.0 : 0.0);
    v.push_back(input.aspect_feature);
    return v;
}

std::array<double, 3> TypeClassifier::probabilities(const StickerInput& input) const {
    return forward(std::span(&input, 1), nullptr).front();
}

TypeDecision TypeClassifier::classify(const StickerInput& input, const Thresholds& t) const {
    const auto p = probabilities(input);
    TypeDecision d;
    d.p_filter = p[0];
    d.p_mask = p[1];
    d.p_transparency = p[2];
    d.is_filter = p[0] >= t.filter;
    d.use_mask = p[1] >= t.mask;
    d.transparency = p[2] >= t.transparency;
    return d;
}

double TypeClassifier::loss_and_grad(std::span<const StickerInput> batch, std::span<const TypeLabels> labels) {
    if (batch.size() != labels.size() || batch.empty()) throw InputError("loss_and_grad: batch/label size mismatch");
    Forward cache;
    const auto probs = forward(batch, &cache);
    const int n = static_cast<int>(batch.size());
    const double inv = 1.0 / n;

    double loss = 0.0;
    nn::Tensor4 dlogits(nn::Shape{n, 3, 1, 1});
    for (int i = 0; i < n; ++i) {
        loss += classifier_loss(probs[i], labels[i]);
        const std::array<double, 3> y{labels[i].is_filter ? 1.0 : 0.0, labels[i].use_mask ? 1.0 : 0.0,
                                      labels[i].transparency ? 1.0 : 0.0};
        const int active = labels[i].is_filter ? 3 : 1;
        for (int k = 0; k < active; ++k) {
            const double p = probs[i][k];
            dlogits.at(i, k, 0, 0) = nn::bce_grad(p, y[k]) * p * (1.0 - p) * inv;
        }
    }

    nn::Tensor4 g = mlp_[2].backward(params_, cache.linear[2], dlogits);
    g = nn::relu_backward(cache.hidden[1], g);
    g = mlp_[1].backward(params_, cache.linear[1], g);
    g = nn::relu_backward(cache.hidden[0], g);
    g = mlp_[0].backward(params_, cache.linear[0], g);

    const int width = config_.backbone.global_width();
    nn::Tensor4 dglobal(cache.global_shape);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < width; ++c) dglobal.at(i, c, 0, 0) = g.at(i, c, 0, 0);
    }
    std::vector<nn::Tensor4> no_taps(config_.backbone.taps.size());
    backbone_.backward(params_, cache.backbone, no_taps, dglobal);
    return loss * inv;
}

double type_accuracy(const TypeClassifier& model, std::span<const ClassifierSample> samples,
                     const Thresholds& thresholds) {
    if (samples.empty()) return 0.0;
    const auto& cfg = model.config();
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const auto in = make_sticker_input(*s.sticker, cfg.input_size, cfg.resize_size);
        if (model.classify(in, thresholds).is_filter == s.labels.is_filter) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<EpochMetrics> train_classifier(TypeClassifier& model, nn::SgdMomentum& optimizer,
                                           std::span<const ClassifierSample> train,
                                           std::span<const ClassifierSample> val, const TrainConfig& config,
                                           const EpochCallback& on_epoch) {
    if (train.empty()) throw InputError("train_classifier: empty training set");
    const auto filters = std::count_if(train.begin(), train.end(), [](const auto& s) { return s.labels.is_filter; });
    if (filters == 0 || filters == static_cast<long>(train.size())) {
        throw InputError("train_classifier: training set must contain both filter- and sticker-style samples");
    }
    if (config.batch_size < 1) throw InputError("train_classifier: batch_size must be >= 1");

    const auto& cfg = model.config();
    std::vector<EpochMetrics> history;
    for (int epoch = config.start_epoch; epoch < config.end_epoch(); ++epoch) {
        optimizer.set_learning_rate(config.lr_at(epoch));
        const auto order = epoch_order(train.size(), config.seed, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<StickerInput> inputs;
            std::vector<TypeLabels> labels;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                Rng crop_rng(mix_seed(config.seed ^ 0x43524F50ULL, static_cast<std::uint64_t>(epoch) * 1000003ULL + idx));
                inputs.push_back(make_sticker_input(*train[idx].sticker, cfg.input_size, cfg.resize_size, &crop_rng));
                labels.push_back(train[idx].labels);
            }
            const double loss = model.loss_and_grad(inputs, labels);
            if (!std::isfinite(loss)) throw NumericError("classifier loss became non-finite");
            optimizer.step(model.params());
            loss_sum += loss;
            ++batches;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.lr = optimizer.learning_rate();
        m.train_loss = loss_sum / static_cast<double>(batches);
        m.train_metric = type_accuracy(model, train);
        m.val_metric = val.empty() ? 0.0 : type_accuracy(model, val);
        history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return history;
}

}  // namespace stickernet::classifier
