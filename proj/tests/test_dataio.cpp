#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "stickernet/dataio.hpp"
#include "stickernet/error.hpp"
#include "stickernet/geometry.hpp"
#include "stickernet/image_io.hpp"
#include "stickernet/synth.hpp"

using namespace stickernet;
using namespace stickernet::dataio;

namespace {

std::vector<PlacementRecord> records_for(std::size_t stickers, std::size_t per_sticker) {
    std::vector<PlacementRecord> out;
    for (std::size_t s = 0; s < stickers; ++s) {
        for (std::size_t k = 0; k < per_sticker; ++k) {
            PlacementRecord r;
            r.record_id = "r" + std::to_string(s) + "_" + std::to_string(k);
            r.sticker_id = "st" + std::to_string(s);
            r.host_ref = "h.png";
            r.sticker_ref = "s.png";
            out.push_back(r);
        }
    }
    return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "stickernet_test_dataio" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("record serialization round-trips") {
    PlacementRecord r;
    r.record_id = "r1";
    r.sticker_id = "s1";
    r.host_ref = "hosts/a.png";
    r.sticker_ref = "stickers/b.png";
    r.x = 0.125;
    r.y = -0.3;
    r.w = 1.7;
    r.h = 0.1;
    r.opacity = 0.6;
    r.rotation_deg = 12.5;
    r.mask_ref = "masks/a.png";
    r.style_label = StyleLabel::filter;
    CHECK(parse_record(serialize_record(r)) == r);
    r.mask_ref.reset();
    r.style_label = StyleLabel::unknown;
    CHECK(parse_record(serialize_record(r)) == r);

    const auto line = serialize_record(r);
    for (const char* key : {"record_id", "sticker_id", "host_ref", "sticker_ref", "x", "y", "w", "h", "opacity",
                            "rotation_deg", "style_label"}) {
        CHECK(line.find("\"" + std::string(key) + "\"") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_record("{not json"), DataError);
    CHECK_THROWS_AS(parse_record(R"({"record_id":"a","sticker_id":"b","host_ref":"h","sticker_ref":"s","x":0,"y":0,"w":0,"h":1,"opacity":1,"rotation_deg":0,"style_label":"sticker"})"),
                    DataError);
}

TEST_CASE("filter candidate heuristic") {
    const auto c = label_filter_candidates({{"a", {0.9, 0.8, 0.1}}, {"b", {0.1, 0.2}}, {"c", {0.51}}, {"d", {0.5, 0.5}}});
    CHECK(c == std::set<std::string>{"a", "c"});
    CHECK(label_filter_candidates({{"e", {0.6, 0.1}}}) == std::set<std::string>{"e"});
    CHECK_THROWS_AS(label_filter_candidates({{"x", {}}}), InputError);
}

TEST_CASE("split examples") {
    const auto records = records_for(1000, 2);
    const auto m = split_by_sticker(records, 7);
    CHECK(m.count(Split::train) >= 880);
    CHECK(m.count(Split::train) <= 920);
    CHECK(std::abs(static_cast<double>(m.count(Split::val)) / 1000 - 0.05) <= 0.01);
    CHECK(std::abs(static_cast<double>(m.count(Split::test)) / 1000 - 0.05) <= 0.01);
    CHECK(split_by_sticker(records, 7).assignment == m.assignment);
    CHECK(split_by_sticker(records, 8).assignment != m.assignment);
    CHECK_THROWS_AS(split_by_sticker(records_for(2, 5), 1), InputError);

    const auto small = split_by_sticker(records_for(20, 1), 3);
    CHECK(small.count(Split::val) >= 1);
    CHECK(small.count(Split::test) >= 1);
}

TEST_CASE("no sticker crosses splits") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto records = records_for(200 + seed * 13, 3);
        const auto m = split_by_sticker(records, seed);
        std::map<std::string, std::set<Split>> seen;
        for (const auto& r : records) seen[r.sticker_id].insert(m.at(r.sticker_id));
        for (const auto& [id, splits] : seen) CHECK(splits.size() == 1);
        const auto train = m.ids(Split::train);
        for (const auto& id : m.ids(Split::test)) CHECK(train.count(id) == 0);
    }
}

TEST_CASE("split file round-trips") {
    const auto dir = fresh_dir("split");
    const auto m = split_by_sticker(records_for(50, 1), 2);
    write_split_file(dir / "splits.txt", m);
    CHECK(read_split_file(dir / "splits.txt").assignment == m.assignment);
}

TEST_CASE("sample_cap") {
    auto records = records_for(1, 50);
    auto more = records_for(2, 1000);
    records.insert(records.end(), more.begin() + 1000, more.end());  // sticker st1 with 1000 records
    const auto capped = sample_cap(records, kDefaultSampleCap, 5);
    std::map<std::string, int> count;
    for (const auto& r : capped) ++count[r.sticker_id];
    CHECK(count["st0"] == 50);
    CHECK(count["st1"] == 300);
    CHECK(count.size() == 2);
    CHECK(sample_cap(records, 300, 5) == capped);

    // Relative order is preserved.
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < records.size(); ++i) position[records[i].record_id] = i;
    for (std::size_t i = 1; i < capped.size(); ++i) {
        CHECK(position[capped[i - 1].record_id] < position[capped[i].record_id]);
    }
}

TEST_CASE("sample_cap never exceeds the cap") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        std::vector<PlacementRecord> records;
        for (int i = 0; i < 3000; ++i) {
            PlacementRecord r;
            r.record_id = std::to_string(i);
            r.sticker_id = "s" + std::to_string(rng.uniform_int(0, 6));
            records.push_back(r);
        }
        std::map<std::string, int> count;
        for (const auto& r : sample_cap(records, 300, t)) ++count[r.sticker_id];
        for (const auto& [id, n] : count) CHECK(n <= 300);
        CHECK(count.size() == 7);
    }
}

TEST_CASE("synthetic generator properties") {
    const auto ds = synth_generate(400, 3);
    const auto again = synth_generate(400, 3);
    CHECK(ds.records == again.records);
    CHECK(ds.images == again.images);
    CHECK(ds.records.size() == 400);

    const auto grid = geometry::build_anchor_grid({{8, 8}, {4, 4}});
    std::size_t sticker_records = 0;
    std::size_t with_positive = 0;
    for (const auto& r : ds.records) {
        r.validate();
        if (r.style_label == StyleLabel::filter) {
            CHECK(r.box() == geometry::Box{0, 0, 1, 1});
            CHECK((r.opacity == 1.0 || r.opacity == 0.6));
            continue;
        }
        REQUIRE(r.style_label == StyleLabel::sticker);
        ++sticker_records;
        // gt center sits on the target centroid, measured from the stored mask.
        const Image& mask = ds.image(host_mask_ref(r.host_ref));
        double sx = 0, sy = 0, n = 0;
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                if (mask.at(x, y, 0) > 127) {
                    sx += x + 0.5;
                    sy += y + 0.5;
                    n += 1;
                }
            }
        }
        REQUIRE(n > 0);
        CHECK(std::abs(r.box().center_x() * mask.width - sx / n) <= 1.0);
        CHECK(std::abs(r.box().center_y() * mask.height - sy / n) <= 1.0);
        // Box aspect follows the sticker's pixel aspect.
        const Image& st = ds.image(r.sticker_ref);
        CHECK(r.w / r.h == doctest::Approx(static_cast<double>(st.width) / st.height).epsilon(1e-9));
        const auto pos = geometry::assign_positives(grid, r.box());
        with_positive += std::find(pos.begin(), pos.end(), true) != pos.end();
    }
    CHECK(static_cast<double>(with_positive) >= 0.99 * static_cast<double>(sticker_records));
}

TEST_CASE("synthetic style mix is about 80/20") {
    const auto ds = synth_generate(5000, 11);
    std::size_t filters = 0;
    for (const auto& r : ds.records) filters += r.style_label == StyleLabel::filter;
    CHECK(std::abs(static_cast<double>(filters) / 5000 - 0.2) <= 0.02);
}

TEST_CASE("filter stickers carry labels consistent with their kind") {
    const auto ds = synth_generate(200, 5);
    std::map<std::string, std::set<std::pair<bool, bool>>> labels;
    for (const auto& r : ds.records) {
        if (r.style_label != StyleLabel::filter) continue;
        labels[r.sticker_id].insert({r.use_mask(), r.transparency()});
        if (r.mask_ref) CHECK(*r.mask_ref == host_mask_ref(r.host_ref));
    }
    CHECK_FALSE(labels.empty());
    for (const auto& [id, set] : labels) CHECK(set.size() == 1);
}

TEST_CASE("dataset directories round-trip") {
    auto ds = synth_generate(30, 2);
    ds.split = split_by_sticker(ds.records, 2);
    const auto dir = fresh_dir("roundtrip");
    write_dataset(dir, ds);
    CHECK(std::filesystem::exists(dir / kManifestFile));
    CHECK(std::filesystem::exists(dir / kSplitFile));
    CHECK(std::filesystem::exists(dir / kCandidatesFile));
    const auto loaded = load_dataset(dir);
    CHECK(loaded.records == ds.records);
    CHECK(loaded.split.assignment == ds.split.assignment);
    for (const auto& [ref, img] : ds.images) CHECK(loaded.image(ref) == img);

    // The heuristic recovers the generator's filter stickers from coverage alone.
    std::ifstream cand(dir / kCandidatesFile);
    std::set<std::string> listed;
    for (std::string id; cand >> id;) listed.insert(id);
    std::set<std::string> filters;
    for (const auto& r : ds.records) {
        if (r.style_label == StyleLabel::filter) filters.insert(r.sticker_id);
    }
    CHECK(listed == filters);

    CHECK_THROWS_AS(load_dataset(fresh_dir("empty")), DataError);
    const auto sticker_only = ds.select(Split::train, StyleLabel::sticker);
    for (const auto* r : sticker_only) CHECK(r->style_label == StyleLabel::sticker);
}
