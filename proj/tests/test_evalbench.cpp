#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stickernet/error.hpp"
#include "stickernet/evalbench.hpp"
#include "stickernet/pipeline.hpp"
#include "stickernet/synth.hpp"

using namespace stickernet;
using namespace stickernet::evalbench;
using geometry::Box;

TEST_CASE("center baseline examples") {
    const Box sq = baseline_center({64, 64}, {30, 30});
    CHECK(sq.w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sq.h == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sq.x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sq.y == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const Box wide = baseline_center({64, 64}, {40, 20});
    CHECK(wide.w == doctest::Approx(std::sqrt(2.0 / 9.0)).epsilon(1e-12));
    CHECK(wide.h == doctest::Approx(std::sqrt(2.0 / 9.0) / 2).epsilon(1e-12));
    CHECK(wide.center_x() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(wide.center_y() == doctest::Approx(0.5).epsilon(1e-15));

    // Non-square host: pixel aspect is preserved, normalized area stays 1/9.
    const Box on_wide_host = baseline_center({200, 100}, {10, 10});
    CHECK(on_wide_host.w * 200 == doctest::Approx(on_wide_host.h * 100));
    CHECK(on_wide_host.w * on_wide_host.h == doctest::Approx(1.0 / 9.0));
    CHECK_THROWS_AS(baseline_center({0, 5}, {1, 1}), InputError);
}

TEST_CASE("random baseline draws stay in range") {
    CHECK(baseline_random({64, 64}, {20, 10}, 3) == baseline_random({64, 64}, {20, 10}, 3));
    double min_area = 1, max_area = 0, min_mult = 10, max_mult = 0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const Box b = baseline_random({64, 64}, {20, 10}, s);
        const double area = b.w * b.h;
        const double mult = (b.w / b.h) / 2.0;
        min_area = std::min(min_area, area);
        max_area = std::max(max_area, area);
        min_mult = std::min(min_mult, mult);
        max_mult = std::max(max_mult, mult);
        CHECK(b.center_x() >= 0.0);
        CHECK(b.center_x() <= 1.0);
        CHECK(b.center_y() >= 0.0);
        CHECK(b.center_y() <= 1.0);
    }
    CHECK(min_area >= 0.04 - 1e-12);
    CHECK(max_area <= 1.0 + 1e-12);
    CHECK(min_mult >= 0.5 - 1e-12);
    CHECK(max_mult <= 2.0 + 1e-12);
    CHECK(max_area - min_area > 0.9);
}

namespace {

std::vector<EvalCase> cases_from(const std::vector<Box>& gts) {
    std::vector<EvalCase> out;
    for (std::size_t i = 0; i < gts.size(); ++i) out.push_back({"r" + std::to_string(i), nullptr, nullptr, nullptr, gts[i]});
    return out;
}

}  // namespace

TEST_CASE("evaluate examples and invariants") {
    const std::vector<Box> gts{{0.1, 0.1, 0.3, 0.2}, {0.5, 0.4, 0.2, 0.5}, {0.0, 0.6, 0.4, 0.3}};
    const auto cases = cases_from(gts);
    const std::vector<NamedMethod> methods{
        {"oracle", [](const EvalCase& c) { return c.gt; }},
        {"fixed", [](const EvalCase&) { return Box{0.4, 0.4, 0.2, 0.2}; }},
        {"broken",
         [](const EvalCase& c) -> Box {
             if (c.record_id == "r1") throw std::runtime_error("boom");
             return Box{0, 0, 0, 1};
         }},
    };
    const auto report = evaluate(methods, cases, 42);
    CHECK(report.count() == 3);
    CHECK(report.fingerprint == 42);
    REQUIRE(report.methods.size() == 3);
    for (const auto& m : report.methods) CHECK(m.scores.size() == 3);
    CHECK(report.method("oracle").mean == 1.0);
    CHECK(report.method("oracle").median == 1.0);
    const auto& broken = report.method("broken");
    CHECK(broken.scores == std::vector<double>{-1.0, -1.0, -1.0});
    CHECK(broken.failures.size() == 3);
    CHECK(broken.failures[1].message == "boom");
    for (const auto& m : report.methods) {
        for (double s : m.scores) {
            CHECK(s >= -1.0);
            CHECK(s <= 1.0);
        }
    }
    CHECK_THROWS_AS(evaluate(methods, std::vector<EvalCase>{}), InputError);

    // Permuting the test set permutes scores and leaves aggregates unchanged.
    std::vector<Box> permuted{gts[2], gts[0], gts[1]};
    const auto p = evaluate(methods, cases_from(permuted));
    const auto& a = report.method("fixed");
    const auto& b = p.method("fixed");
    CHECK(b.scores[0] == a.scores[2]);
    CHECK(b.scores[1] == a.scores[0]);
    CHECK(b.mean == doctest::Approx(a.mean).epsilon(1e-15));
    CHECK(b.median == a.median);
}

TEST_CASE("compensated mean and median") {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    CHECK(compensated_mean(v) == 0.5);
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("report emission") {
    const auto cases = cases_from({{0.1, 0.1, 0.3, 0.2}, {0.5, 0.4, 0.2, 0.5}});
    const std::vector<NamedMethod> methods{{"oracle", [](const EvalCase& c) { return c.gt; }},
                                           {"fail", [](const EvalCase&) -> Box { throw std::runtime_error("x"); }}};
    const auto report = evaluate(methods, cases, 0xabc);
    std::ostringstream table;
    print_report(table, report);
    CHECK(table.str().find("oracle") != std::string::npos);
    CHECK(table.str().find("0000000000000abc") != std::string::npos);

    const auto path = std::filesystem::temp_directory_path() / "stickernet_eval_report.jsonl";
    write_report_jsonl(path, report);
    std::ifstream in(path);
    int lines = 0;
    int errors = 0;
    for (std::string line; std::getline(in, line);) {
        ++lines;
        errors += line.find("\"error\"") != std::string::npos;
    }
    CHECK(lines == 2 + 4);
    CHECK(errors == 2);
}

TEST_CASE("center beats random on the synthetic test set") {
    auto ds = dataio::synth_generate(2000, 7);
    ds.split = dataio::split_by_sticker(ds.records, 7);
    const auto set = pipeline::placement_samples(ds, dataio::Split::test, 300, 1);
    const auto cases = pipeline::eval_cases(set);
    auto dims = [](const Image* img) { return Dims{img->width, img->height}; };
    const std::vector<NamedMethod> methods{
        {"center", [&](const EvalCase& c) { return baseline_center(dims(c.host), dims(c.sticker)); }},
        {"random",
         [&](const EvalCase& c) {
             return baseline_random(dims(c.host), dims(c.sticker), fnv1a(c.record_id.data(), c.record_id.size()));
         }},
    };
    const auto report = evaluate(methods, cases);
    CHECK(report.method("center").mean > report.method("random").mean);
}
