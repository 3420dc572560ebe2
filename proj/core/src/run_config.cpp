#include "stickernet/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "stickernet/error.hpp"
#include "stickernet/rng.hpp"

namespace stickernet {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        throw InputError("config key '" + std::string(key) + "': cannot parse '" + std::string(v) + "'");
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_list(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> parse_list(std::string_view key, std::string_view v) {
    std::vector<int> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_number<int>(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) throw InputError("config key '" + std::string(key) + "': empty list");
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field number_field(std::string key, T RunConfig::*member) {
    return Field{key,
                 [member](const RunConfig& c) {
                     if constexpr (std::is_floating_point_v<T>) {
                         return format_double(c.*member);
                     } else {
                         return std::to_string(c.*member);
                     }
                 },
                 [member, key](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); }};
}

Field list_field(std::string key, std::vector<int> RunConfig::*member) {
    return Field{key, [member](const RunConfig& c) { return format_list(c.*member); },
                 [member, key](RunConfig& c, std::string_view v) { c.*member = parse_list(key, v); }};
}

Field string_field(std::string key, std::string RunConfig::*member) {
    return Field{key, [member](const RunConfig& c) { return c.*member; },
                 [member](RunConfig& c, std::string_view v) { c.*member = std::string(v); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        number_field("seed", &RunConfig::seed),
        number_field("input_size", &RunConfig::input_size),
        list_field("host_widths", &RunConfig::host_widths),
        list_field("host_taps", &RunConfig::host_taps),
        list_field("sticker_widths", &RunConfig::sticker_widths),
        number_field("head_hidden", &RunConfig::head_hidden),
        number_field("lambda", &RunConfig::lambda),
        string_field("regression_loss", &RunConfig::regression_loss),
        list_field("classifier_widths", &RunConfig::classifier_widths),
        number_field("classifier_resize", &RunConfig::classifier_resize),
        number_field("classifier_hidden", &RunConfig::classifier_hidden),
        number_field("threshold_filter", &RunConfig::threshold_filter),
        number_field("threshold_mask", &RunConfig::threshold_mask),
        number_field("threshold_transparency", &RunConfig::threshold_transparency),
        number_field("filter_opacity", &RunConfig::filter_opacity),
        number_field("classifier_epochs", &RunConfig::classifier_epochs),
        number_field("classifier_batch", &RunConfig::classifier_batch),
        number_field("classifier_lr", &RunConfig::classifier_lr),
        number_field("placement_epochs", &RunConfig::placement_epochs),
        number_field("placement_batch", &RunConfig::placement_batch),
        number_field("placement_lr", &RunConfig::placement_lr),
        number_field("momentum", &RunConfig::momentum),
        number_field("lr_drop_fraction", &RunConfig::lr_drop_fraction),
        number_field("lr_drop_factor", &RunConfig::lr_drop_factor),
        number_field("sample_cap", &RunConfig::sample_cap),
        string_field("data_dir", &RunConfig::data_dir),
        string_field("weights_dir", &RunConfig::weights_dir),
    };
    return f;
}

const Field& field(std::string_view key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw InputError("unknown config key '" + std::string(key) + "'");
}

std::vector<int> strides_for(const std::vector<int>& widths) { return std::vector<int>(widths.size(), 2); }

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return k;
}

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, trim(value)); }

void RunConfig::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw InputError(std::string("config: ") + msg);
    };
    require(input_size >= 8, "input_size must be >= 8");
    require(head_hidden >= 1 && classifier_hidden >= 1, "hidden widths must be >= 1");
    require(lambda >= 0.0, "lambda must be >= 0");
    require(regression_loss == "diou" || regression_loss == "iou", "regression_loss must be 'diou' or 'iou'");
    require(classifier_resize >= input_size, "classifier_resize must be >= input_size");
    for (double t : {threshold_filter, threshold_mask, threshold_transparency}) {
        require(t >= 0.0 && t <= 1.0, "thresholds must lie in [0, 1]");
    }
    require(filter_opacity >= 0.0 && filter_opacity <= 1.0, "filter_opacity must lie in [0, 1]");
    require(classifier_epochs >= 1 && placement_epochs >= 1, "epochs must be >= 1");
    require(classifier_batch >= 1 && placement_batch >= 1, "batch sizes must be >= 1");
    require(classifier_lr > 0.0 && placement_lr > 0.0, "learning rates must be > 0");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
    require(lr_drop_fraction >= 0.0 && lr_drop_fraction <= 1.0, "lr_drop_fraction must lie in [0, 1]");
    require(lr_drop_factor > 0.0, "lr_drop_factor must be > 0");
    require(sample_cap >= 1, "sample_cap must be >= 1");
    placement_config().host_backbone.validate();
    placement_config().sticker_backbone.validate();
    classifier_config().backbone.validate();
}

placement::PlacementConfig RunConfig::placement_config() const {
    placement::PlacementConfig p;
    p.input_size = input_size;
    p.host_backbone = nn::BackboneSpec{5, host_widths, strides_for(host_widths), host_taps, 1};
    p.sticker_backbone =
        nn::BackboneSpec{4, sticker_widths, strides_for(sticker_widths), {static_cast<int>(sticker_widths.size()) - 1}, 1};
    p.head_hidden = head_hidden;
    p.lambda = lambda;
    p.regression = regression_loss == "iou" ? placement::RegressionLoss::iou : placement::RegressionLoss::diou;
    return p;
}

classifier::ClassifierConfig RunConfig::classifier_config() const {
    classifier::ClassifierConfig c;
    c.backbone = nn::BackboneSpec{
        4, classifier_widths, strides_for(classifier_widths), {static_cast<int>(classifier_widths.size()) - 1}, 1};
    c.input_size = input_size;
    c.resize_size = classifier_resize;
    c.mlp_hidden = classifier_hidden;
    return c;
}

classifier::Thresholds RunConfig::thresholds() const {
    return classifier::Thresholds{threshold_filter, threshold_mask, threshold_transparency};
}

TrainConfig RunConfig::classifier_train() const {
    TrainConfig t;
    t.epochs = classifier_epochs;
    t.batch_size = classifier_batch;
    t.lr = classifier_lr;
    t.momentum = momentum;
    t.lr_drop_fraction = lr_drop_fraction;
    t.lr_drop_factor = lr_drop_factor;
    t.seed = seed;
    return t;
}

TrainConfig RunConfig::placement_train() const {
    TrainConfig t = classifier_train();
    t.epochs = placement_epochs;
    t.batch_size = placement_batch;
    t.lr = placement_lr;
    return t;
}

std::uint64_t RunConfig::fingerprint() const {
    const std::string s = serialize_config(*this);
    return fnv1a(s.data(), s.size());
}

std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(c) + "\n";
    return out;
}

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return c;
}

RunConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void write_config(const std::filesystem::path& path, const RunConfig& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write config file: " + path.string());
    out << serialize_config(c);
    if (!out) throw DataError("failed writing config file: " + path.string());
}

}  // namespace stickernet
