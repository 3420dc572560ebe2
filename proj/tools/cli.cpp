#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stickernet/classifier.hpp"
#include "stickernet/compositor.hpp"
#include "stickernet/dataio.hpp"
#include "stickernet/error.hpp"
#include "stickernet/evalbench.hpp"
#include "stickernet/image_io.hpp"
#include "stickernet/pipeline.hpp"
#include "stickernet/placement.hpp"
#include "stickernet/rng.hpp"
#include "stickernet/run_config.hpp"
#include "stickernet/synth.hpp"
#include "stickernet/weights_io.hpp"

namespace stickernet::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kClassifierWeights = "classifier.snw";
constexpr const char* kPlacementWeights = "placement.snw";
constexpr const char* kMetricsFile = "metrics.jsonl";
constexpr const char* kConfigEcho = "config.txt";

/// Config file path plus `--<key>` overrides shared by every subcommand.
struct ConfigOptions {
    std::string path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app) {
        app.add_option("--config", path, "flat key = value config file");
        for (const auto& key : RunConfig::keys()) {
            app.add_option_function<std::string>(
                "--" + key, [this, key](const std::string& v) { overrides[key] = v; }, "override config key " + key);
        }
    }

    RunConfig resolve() const {
        RunConfig c = path.empty() ? RunConfig{} : read_config(path);
        for (const auto& [k, v] : overrides) c.set(k, v);
        c.validate();
        return c;
    }
};

void echo_config(const fs::path& dir, const RunConfig& c) {
    fs::create_directories(dir);
    write_config(dir / kConfigEcho, c);
}

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

// ---------------------------------------------------------------------------

struct GenerateArgs {
    ConfigOptions config;
    std::size_t n = 0;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const RunConfig c = a.config.resolve();
    dataio::Dataset ds = dataio::synth_generate(a.n, c.seed);
    ds.split = dataio::split_by_sticker(ds.records, c.seed);
    dataio::write_dataset(a.out, ds);
    echo_config(a.out, c);
    out << "generated " << ds.records.size() << " records (" << ds.split.count(dataio::Split::train) << " train / "
        << ds.split.count(dataio::Split::val) << " val / " << ds.split.count(dataio::Split::test)
        << " test stickers) in " << a.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    ConfigOptions config;
    std::string stage = "all";
    std::string data;
    std::string out;
    bool resume = false;
    int stop_after = -1;
};

class MetricsLog {
public:
    MetricsLog(const fs::path& path, bool append)
        : stream_(path, append ? std::ios::app | std::ios::binary : std::ios::trunc | std::ios::binary) {
        if (!stream_) throw DataError("cannot write metrics log: " + path.string());
    }

    void write(const std::string& stage, const EpochMetrics& m) {
        ordered_json j;
        j["stage"] = stage;
        j["epoch"] = m.epoch;
        j["train_loss"] = m.train_loss;
        j["train_metric"] = m.train_metric;
        j["val_metric"] = m.val_metric;
        j["lr"] = m.lr;
        stream_ << j.dump() << '\n';
        stream_.flush();
    }

private:
    std::ofstream stream_;
};

/// Resume state of one stage: returns the first epoch still to run.
int restore(const fs::path& checkpoint, bool resume, nn::ModelParams& params, nn::SgdMomentum& opt) {
    if (!resume || !fs::exists(checkpoint)) return 0;
    const auto epoch = nn::load_checkpoint(checkpoint, params, &opt);
    return epoch ? *epoch + 1 : 0;
}

void print_epoch(std::ostream& out, const std::string& stage, const EpochMetrics& m, const char* metric) {
    char line[200];
    std::snprintf(line, sizeof line, "[%s] epoch %d  loss %.5f  train %.4f  val %s %.4f  lr %.5f\n", stage.c_str(),
                  m.epoch, m.train_loss, m.train_metric, metric, m.val_metric, m.lr);
    out << line << std::flush;
}

void train_classifier_stage(const dataio::Dataset& ds, const RunConfig& c, const fs::path& dir, bool resume,
                            int stop_after, MetricsLog& log, std::ostream& out) {
    const auto train = pipeline::classifier_samples(ds, dataio::Split::train);
    const auto val = pipeline::classifier_samples(ds, dataio::Split::val);
    classifier::TypeClassifier model(c.classifier_config(), c.seed);
    TrainConfig tc = c.classifier_train();
    nn::SgdMomentum opt(tc.lr, tc.momentum);
    const fs::path ckpt = dir / kClassifierWeights;
    tc.start_epoch = restore(ckpt, resume, model.params(), opt);
    tc.stop_epoch = stop_after;
    out << "[classifier] " << train.size() << " train / " << val.size() << " val stickers, epochs " << tc.start_epoch
        << ".." << tc.end_epoch() << '\n';
    classifier::train_classifier(model, opt, train, val, tc, [&](const EpochMetrics& m) {
        nn::save_checkpoint(ckpt, model.params(), &opt, m.epoch);
        log.write("classifier", m);
        print_epoch(out, "classifier", m, "acc");
    });
}

void train_placement_stage(const dataio::Dataset& ds, const RunConfig& c, const fs::path& dir, bool resume,
                           int stop_after, MetricsLog& log, std::ostream& out) {
    const auto cap = static_cast<std::size_t>(c.sample_cap);
    const auto train = pipeline::placement_samples(ds, dataio::Split::train, cap, c.seed);
    const auto val = pipeline::placement_samples(ds, dataio::Split::val, cap, c.seed);
    if (train.samples.empty()) throw DataError("no sticker-style records in the training split");
    placement::PlacementPredictor model(c.placement_config(), c.seed);
    TrainConfig tc = c.placement_train();
    nn::SgdMomentum opt(tc.lr, tc.momentum);
    const fs::path ckpt = dir / kPlacementWeights;
    tc.start_epoch = restore(ckpt, resume, model.params(), opt);
    tc.stop_epoch = stop_after;
    out << "[placement] " << train.samples.size() << " train / " << val.samples.size() << " val records, epochs "
        << tc.start_epoch << ".." << tc.end_epoch() << '\n';
    placement::train_placement(model, opt, train.samples, val.samples, tc, [&](const EpochMetrics& m) {
        nn::save_checkpoint(ckpt, model.params(), &opt, m.epoch);
        log.write("placement", m);
        print_epoch(out, "placement", m, "diou");
    });
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const RunConfig c = a.config.resolve();
    const fs::path data = a.data.empty() ? fs::path(c.data_dir) : fs::path(a.data);
    const fs::path dir = a.out.empty() ? fs::path(c.weights_dir) : fs::path(a.out);
    const dataio::Dataset ds = dataio::load_dataset(data);
    echo_config(dir, c);
    MetricsLog log(dir / kMetricsFile, a.resume);
    if (a.stage == "classifier" || a.stage == "all") train_classifier_stage(ds, c, dir, a.resume, a.stop_after, log, out);
    if (a.stage == "placement" || a.stage == "all") train_placement_stage(ds, c, dir, a.resume, a.stop_after, log, out);
    return kOk;
}

// ---------------------------------------------------------------------------

struct ComposeArgs {
    ConfigOptions config;
    std::string host;
    std::string sticker;
    std::string mask;
    std::string weights;
    std::string out;
    std::string force_style = "auto";
};

ordered_json box_json(const geometry::Box& b) { return ordered_json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

int cmd_compose(const ComposeArgs& a, std::ostream& out) {
    const RunConfig c = a.config.resolve();
    const fs::path weights = a.weights.empty() ? fs::path(c.weights_dir) : fs::path(a.weights);
    const Image host = read_png(a.host);
    const Image sticker = read_png(a.sticker);
    const Image mask = a.mask.empty() ? luminance_contrast_mask(host) : to_gray(read_png(a.mask));

    ordered_json record;
    record["host"] = a.host;
    record["sticker"] = a.sticker;

    classifier::TypeDecision decision;
    if (a.force_style == "sticker") {
        decision.is_filter = false;
        record["classifier"] = "bypassed";
    } else {
        classifier::TypeClassifier cls(c.classifier_config(), c.seed);
        nn::load_checkpoint(weights / kClassifierWeights, cls.params());
        const auto cfg = c.classifier_config();
        decision = cls.classify(classifier::make_sticker_input(sticker, cfg.input_size, cfg.resize_size), c.thresholds());
        record["classifier"] = ordered_json{{"p_filter", decision.p_filter},
                                            {"p_mask", decision.p_mask},
                                            {"p_transparency", decision.p_transparency}};
        if (a.force_style == "filter") decision.is_filter = true;
    }

    compositor::CompositeSpec spec;
    if (decision.is_filter) {
        spec.style = compositor::Style::filter;
        spec.use_mask = decision.use_mask;
        spec.opacity = decision.transparency ? c.filter_opacity : 1.0;
        if (spec.use_mask) spec.mask = mask;
        record["style"] = "filter";
        record["use_mask"] = spec.use_mask;
        record["opacity"] = spec.opacity;
    } else {
        placement::PlacementPredictor model(c.placement_config(), c.seed);
        nn::load_checkpoint(weights / kPlacementWeights, model.params());
        const auto pred = model.predict(placement::make_host_input(host, mask, c.input_size),
                                        placement::make_placement_sticker(sticker, c.input_size));
        spec.style = compositor::Style::sticker;
        spec.box = pred.box;
        record["style"] = "sticker";
        record["anchor"] = pred.chosen;
        record["confidence"] = pred.confidences[pred.chosen];
        record["box"] = box_json(pred.box);
    }

    const auto result = compositor::composite(host, sticker, spec);
    record["outside_canvas"] = result.outside_canvas;
    const fs::path out_path(a.out);
    fs::create_directories(parent_or_cwd(out_path));
    write_png(out_path, result.image);
    fs::path record_path = out_path;
    record_path.replace_extension(".json");
    std::ofstream rec(record_path, std::ios::binary);
    rec << record.dump(2) << '\n';
    if (!rec) throw DataError("cannot write decision record: " + record_path.string());
    echo_config(parent_or_cwd(out_path), c);
    out << record.dump() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    ConfigOptions config;
    std::string data;
    std::string weights;
    std::string methods = "stickernet,center,random";
    std::string out = "eval_report.jsonl";
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const RunConfig c = a.config.resolve();
    const fs::path data = a.data.empty() ? fs::path(c.data_dir) : fs::path(a.data);
    const fs::path weights = a.weights.empty() ? fs::path(c.weights_dir) : fs::path(a.weights);
    const dataio::Dataset ds = dataio::load_dataset(data);
    const auto set = pipeline::placement_samples(ds, dataio::Split::test, static_cast<std::size_t>(c.sample_cap), c.seed);
    if (set.samples.empty()) throw DataError("no sticker-style records in the test split");
    const auto cases = pipeline::eval_cases(set);

    std::unique_ptr<placement::PlacementPredictor> model;
    std::vector<evalbench::NamedMethod> methods;
    for (const auto& name : split_csv(a.methods)) {
        if (name == "stickernet") {
            model = std::make_unique<placement::PlacementPredictor>(c.placement_config(), c.seed);
            nn::load_checkpoint(weights / kPlacementWeights, model->params());
            methods.push_back(pipeline::model_method(*model));
        } else if (name == "center") {
            methods.push_back(evalbench::center_method());
        } else if (name == "random") {
            methods.push_back(evalbench::random_method(c.seed));
        } else {
            throw InputError("unknown method '" + name + "' (expected stickernet, center or random)");
        }
    }
    if (methods.empty()) throw InputError("--methods lists no method");

    const auto report = evalbench::evaluate(methods, cases, c.fingerprint());
    evalbench::print_report(out, report);
    const fs::path out_path(a.out);
    fs::create_directories(parent_or_cwd(out_path));
    evalbench::write_report_jsonl(out_path, report);
    echo_config(parent_or_cwd(out_path), c);
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"stickernet: expressive sticker composition pipeline"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "write a synthetic dataset with a sticker-disjoint split");
    g->add_option("--n", gen.n, "number of scenes")->required()->check(CLI::PositiveNumber);
    g->add_option("--out", gen.out, "output directory")->required();
    gen.config.attach(*g);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train the classifier and/or placement predictor");
    t->add_option("--stage", tr.stage, "classifier, placement or all")
        ->check(CLI::IsMember({"classifier", "placement", "all"}));
    t->add_option("--data", tr.data, "dataset directory (default: data_dir)");
    t->add_option("--out", tr.out, "weights directory (default: weights_dir)");
    t->add_flag("--resume", tr.resume, "continue from the checkpoints in the weights directory");
    t->add_option("--stop-after", tr.stop_after, "stop after this many epochs in total (checkpoint is kept)");
    tr.config.attach(*t);

    ComposeArgs co;
    auto* c = app.add_subcommand("compose", "classify, place and composite one sticker");
    c->add_option("--host", co.host, "host PNG")->required();
    c->add_option("--sticker", co.sticker, "sticker PNG")->required();
    c->add_option("--mask", co.mask, "host foreground mask PNG (default: estimated)");
    c->add_option("--weights", co.weights, "weights directory (default: weights_dir)");
    c->add_option("--out", co.out, "output PNG; the decision record goes next to it as .json")->required();
    c->add_option("--force-style", co.force_style, "auto, sticker or filter")
        ->check(CLI::IsMember({"auto", "sticker", "filter"}));
    co.config.attach(*c);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score placement methods on the test split");
    e->add_option("--data", ev.data, "dataset directory (default: data_dir)");
    e->add_option("--weights", ev.weights, "weights directory (default: weights_dir)");
    e->add_option("--methods", ev.methods, "comma-separated: stickernet, center, random");
    e->add_option("--out", ev.out, "line-delimited report path");
    ev.config.attach(*e);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        return app.exit(ex, out, err) == 0 ? kOk : kUsage;
    }

    try {
        if (*g) return cmd_generate(gen, out);
        if (*t) return cmd_train(tr, out);
        if (*c) return cmd_compose(co, out);
        return cmd_eval(ev, out);
    } catch (const InputError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const NumericError& ex) {
        err << "numeric failure: " << ex.what() << '\n';
        return kNumeric;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kData;
    }
}

}  // namespace stickernet::cli
