#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stickernet/geometry.hpp"
#include "stickernet/image.hpp"

namespace stickernet::evalbench {

struct Dims {
    int width = 0;
    int height = 0;
};

/// Centered box of area 1/9 with the sticker's pixel aspect ratio.
geometry::Box baseline_center(Dims host, Dims sticker);

/// Random box: aspect multiplier U[0.5, 2] on the sticker aspect, area
/// U[1/25, 1], center uniform in the unit square.
geometry::Box baseline_random(Dims host, Dims sticker, std::uint64_t seed);

struct EvalCase {
    std::string record_id;
    const Image* host = nullptr;
    const Image* mask = nullptr;
    const Image* sticker = nullptr;
    geometry::Box gt;
};

using PlacementMethod = std::function<geometry::Box(const EvalCase&)>;

struct NamedMethod {
    std::string name;
    PlacementMethod place;
};

struct ScoreNote {
    std::size_t index = 0;
    std::string message;
};

struct MethodResult {
    std::string name;
    double mean = 0.0;
    double median = 0.0;
    std::vector<double> scores;  // one per record, in test-set order
    std::vector<ScoreNote> failures;
};

struct EvalReport {
    std::vector<std::string> record_ids;
    std::vector<MethodResult> methods;
    std::uint64_t fingerprint = 0;

    std::size_t count() const { return record_ids.size(); }
    const MethodResult& method(const std::string& name) const;
};

NamedMethod center_method();
/// Random baseline seeded per record from `seed` and the record id, so scores
/// do not depend on test-set order.
NamedMethod random_method(std::uint64_t seed);

/// Worst possible DIoU, assigned when a method throws or returns an invalid box.
inline constexpr double kFailureScore = -1.0;

/// Scores every method on every case. Method failures are recorded, never skipped.
EvalReport evaluate(std::span<const NamedMethod> methods, std::span<const EvalCase> cases,
                    std::uint64_t fingerprint = 0);

/// Neumaier-compensated mean.
double compensated_mean(std::span<const double> values);
double median(std::vector<double> values);

void print_report(std::ostream& os, const EvalReport& report);
/// One summary line per method, then one line per (method, record).
void write_report_jsonl(const std::filesystem::path& path, const EvalReport& report);

}  // namespace stickernet::evalbench
