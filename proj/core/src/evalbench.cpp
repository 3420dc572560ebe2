#include "stickernet/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "stickernet/error.hpp"
#include "stickernet/rng.hpp"

namespace stickernet::evalbench {

using geometry::Box;

namespace {

void check_dims(Dims d, const char* what) {
    if (d.width <= 0 || d.height <= 0) throw InputError(std::string(what) + " dimensions must be positive");
}

// Normalized (w, h) with pixel aspect `aspect` and normalized area `area` on a host of dims `host`.
std::pair<double, double> shape_for(Dims host, double aspect, double area) {
    const double norm_aspect = aspect * static_cast<double>(host.height) / static_cast<double>(host.width);
    const double w = std::sqrt(area * norm_aspect);
    return {w, area / w};
}

}  // namespace

Box baseline_center(Dims host, Dims sticker) {
    check_dims(host, "host");
    check_dims(sticker, "sticker");
    const double aspect = static_cast<double>(sticker.width) / sticker.height;
    const auto [w, h] = shape_for(host, aspect, 1.0 / 9.0);
    return Box::from_center(0.5, 0.5, w, h);
}

NamedMethod center_method() {
    return {"center", [](const EvalCase& c) {
                return baseline_center({c.host->width, c.host->height}, {c.sticker->width, c.sticker->height});
            }};
}

NamedMethod random_method(std::uint64_t seed) {
    return {"random", [seed](const EvalCase& c) {
                return baseline_random({c.host->width, c.host->height}, {c.sticker->width, c.sticker->height},
                                       mix_seed(seed, fnv1a(c.record_id.data(), c.record_id.size())));
            }};
}

Box baseline_random(Dims host, Dims sticker, std::uint64_t seed) {
    check_dims(host, "host");
    check_dims(sticker, "sticker");
    Rng rng(seed);
    const double multiplier = rng.uniform(0.5, 2.0);
    const double area = rng.uniform(1.0 / 25.0, 1.0);
    const double cx = rng.uniform();
    const double cy = rng.uniform();
    const double aspect = multiplier * static_cast<double>(sticker.width) / sticker.height;
    const auto [w, h] = shape_for(host, aspect, area);
    return Box::from_center(cx, cy, w, h);
}

const MethodResult& EvalReport::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.name == name) return m;
    }
    throw InputError("no method named '" + name + "' in report");
}

double compensated_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    double comp = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    return (sum + comp) / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

EvalReport evaluate(std::span<const NamedMethod> methods, std::span<const EvalCase> cases,
                    std::uint64_t fingerprint) {
    if (cases.empty()) throw InputError("evaluate: empty test set");
    if (methods.empty()) throw InputError("evaluate: no methods given");
    EvalReport report;
    report.fingerprint = fingerprint;
    for (const auto& c : cases) {
        if (!c.gt.valid()) throw InputError("evaluate: record '" + c.record_id + "' has an invalid ground-truth box");
        report.record_ids.push_back(c.record_id);
    }
    for (const auto& m : methods) {
        MethodResult r;
        r.name = m.name;
        r.scores.reserve(cases.size());
        for (std::size_t i = 0; i < cases.size(); ++i) {
            try {
                const Box b = m.place(cases[i]);
                if (!b.valid()) throw NumericError("method returned an invalid box");
                r.scores.push_back(geometry::diou(b, cases[i].gt));
            } catch (const std::exception& e) {
                r.scores.push_back(kFailureScore);
                r.failures.push_back({i, e.what()});
            }
        }
        r.mean = compensated_mean(r.scores);
        r.median = median(r.scores);
        report.methods.push_back(std::move(r));
    }
    return report;
}

void print_report(std::ostream& os, const EvalReport& report) {
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %10s %10s %8s %8s\n", "method", "mean_diou", "median", "n", "failed");
    os << line;
    for (const auto& m : report.methods) {
        std::snprintf(line, sizeof line, "%-14s %10.4f %10.4f %8zu %8zu\n", m.name.c_str(), m.mean, m.median,
                      m.scores.size(), m.failures.size());
        os << line;
    }
    std::snprintf(line, sizeof line, "config fingerprint %016llx\n",
                  static_cast<unsigned long long>(report.fingerprint));
    os << line;
}

void write_report_jsonl(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report: " + path.string());
    char fp[17];
    std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(report.fingerprint));
    for (const auto& m : report.methods) {
        nlohmann::ordered_json j;
        j["kind"] = "summary";
        j["method"] = m.name;
        j["mean_diou"] = m.mean;
        j["median_diou"] = m.median;
        j["count"] = m.scores.size();
        j["failures"] = m.failures.size();
        j["fingerprint"] = fp;
        out << j.dump() << '\n';
    }
    for (const auto& m : report.methods) {
        std::size_t next_failure = 0;
        for (std::size_t i = 0; i < m.scores.size(); ++i) {
            nlohmann::ordered_json j;
            j["kind"] = "record";
            j["method"] = m.name;
            j["record_id"] = report.record_ids[i];
            j["diou"] = m.scores[i];
            if (next_failure < m.failures.size() && m.failures[next_failure].index == i) {
                j["error"] = m.failures[next_failure].message;
                ++next_failure;
            }
            out << j.dump() << '\n';
        }
    }
    if (!out) throw DataError("failed writing report: " + path.string());
}

}  // namespace stickernet::evalbench
