#include "stickernet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "stickernet/error.hpp"
#include "stickernet/image_io.hpp"
#include "stickernet/rng.hpp"

namespace stickernet::dataio {

using nlohmann::json;

std::string_view to_string(StyleLabel s) {
    switch (s) {
        case StyleLabel::filter: return "filter";
        case StyleLabel::sticker: return "sticker";
        case StyleLabel::unknown: return "unknown";
    }
    return "unknown";
}

StyleLabel parse_style_label(std::string_view s) {
    if (s == "filter") return StyleLabel::filter;
    if (s == "sticker") return StyleLabel::sticker;
    if (s == "unknown") return StyleLabel::unknown;
    throw DataError("unknown style_label '" + std::string(s) + "'");
}

void PlacementRecord::validate() const {
    if (record_id.empty() || sticker_id.empty()) throw DataError("record without record_id or sticker_id");
    if (!box().valid()) throw DataError("record " + record_id + ": w and h must be positive and finite");
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw DataError("record " + record_id + ": opacity outside [0, 1]");
    if (!std::isfinite(rotation_deg)) throw DataError("record " + record_id + ": rotation must be finite");
}

std::string serialize_record(const PlacementRecord& r) {
    json j;
    j["record_id"] = r.record_id;
    j["sticker_id"] = r.sticker_id;
    j["host_ref"] = r.host_ref;
    j["sticker_ref"] = r.sticker_ref;
    j["x"] = r.x;
    j["y"] = r.y;
    j["w"] = r.w;
    j["h"] = r.h;
    j["opacity"] = r.opacity;
    j["rotation_deg"] = r.rotation_deg;
    j["mask_ref"] = r.mask_ref ? json(*r.mask_ref) : json(nullptr);
    j["style_label"] = std::string(to_string(r.style_label));
    return j.dump();
}

PlacementRecord parse_record(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed record line: ") + e.what());
    }
    if (!j.is_object()) throw DataError("record line is not an object");
    PlacementRecord r;
    try {
        r.record_id = j.at("record_id").get<std::string>();
        r.sticker_id = j.at("sticker_id").get<std::string>();
        r.host_ref = j.at("host_ref").get<std::string>();
        r.sticker_ref = j.at("sticker_ref").get<std::string>();
        r.x = j.at("x").get<double>();
        r.y = j.at("y").get<double>();
        r.w = j.at("w").get<double>();
        r.h = j.at("h").get<double>();
        r.opacity = j.value("opacity", 1.0);
        r.rotation_deg = j.value("rotation_deg", 0.0);
        if (j.contains("mask_ref") && !j["mask_ref"].is_null()) r.mask_ref = j["mask_ref"].get<std::string>();
        r.style_label = parse_style_label(j.value("style_label", std::string("unknown")));
    } catch (const json::exception& e) {
        throw DataError(std::string("record field error: ") + e.what());
    }
    r.validate();
    return r;
}

void write_manifest(const std::filesystem::path& path, std::span<const PlacementRecord> records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& r : records) out << serialize_record(r) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<PlacementRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    std::vector<PlacementRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(parse_record(line));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw DataError("unknown split '" + std::string(s) + "'");
}

Split SplitManifest::at(const std::string& sticker_id) const {
    auto it = assignment.find(sticker_id);
    if (it == assignment.end()) throw DataError("sticker " + sticker_id + " missing from split manifest");
    return it->second;
}

std::set<std::string> SplitManifest::ids(Split s) const {
    std::set<std::string> out;
    for (const auto& [id, split] : assignment) {
        if (split == s) out.insert(id);
    }
    return out;
}

std::size_t SplitManifest::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [s](const auto& kv) { return kv.second == s; }));
}

SplitManifest split_by_sticker(std::span<const PlacementRecord> records, std::uint64_t seed) {
    std::set<std::string> unique;
    for (const auto& r : records) unique.insert(r.sticker_id);
    if (unique.size() < 3) {
        throw InputError("split_by_sticker: need at least 3 distinct stickers, got " + std::to_string(unique.size()));
    }
    std::vector<std::pair<std::uint64_t, std::string>> keyed;
    keyed.reserve(unique.size());
    for (const auto& id : unique) keyed.emplace_back(mix_seed(fnv1a(id.data(), id.size()), seed), id);
    std::sort(keyed.begin(), keyed.end());

    const std::size_t total = keyed.size();
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * total)));
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.05 * total)));
    const std::size_t n_train = total - n_val - n_test;

    SplitManifest m;
    for (std::size_t i = 0; i < total; ++i) {
        const Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
        m.assignment.emplace(keyed[i].second, s);
    }
    return m;
}

void write_split_file(const std::filesystem::path& path, const SplitManifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& [id, split] : m.assignment) out << id << ' ' << to_string(split) << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

SplitManifest read_split_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file " + path.string());
    SplitManifest m;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string id;
        std::string split;
        if (!(ls >> id)) continue;
        if (!(ls >> split)) throw DataError("split file line without a split: " + line);
        if (!m.assignment.emplace(id, parse_split(split)).second) {
            throw DataError("sticker " + id + " listed twice in split file");
        }
    }
    return m;
}

std::set<std::string> label_filter_candidates(const std::map<std::string, std::vector<double>>& usages) {
    std::set<std::string> out;
    for (const auto& [id, coverages] : usages) {
        if (coverages.empty()) throw InputError("label_filter_candidates: sticker " + id + " has no usages");
        const auto large = std::count_if(coverages.begin(), coverages.end(), [](double c) { return c > 0.5; });
        if (static_cast<double>(large) / static_cast<double>(coverages.size()) >= 0.5) out.insert(id);
    }
    return out;
}

std::map<std::string, std::vector<double>> coverage_by_sticker(std::span<const PlacementRecord> records) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& r : records) out[r.sticker_id].push_back(r.coverage());
    return out;
}

std::vector<PlacementRecord> sample_cap(std::span<const PlacementRecord> records, std::size_t cap,
                                        std::uint64_t seed) {
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].sticker_id].push_back(i);

    std::vector<bool> keep(records.size(), true);
    for (auto& [id, idx] : groups) {
        if (idx.size() <= cap) continue;
        Rng rng(mix_seed(seed, fnv1a(id.data(), id.size())));
        // Partial Fisher-Yates: the first `cap` slots become the sample.
        for (std::size_t i = 0; i < cap; ++i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                    static_cast<std::int64_t>(idx.size() - 1)));
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t i = cap; i < idx.size(); ++i) keep[idx[i]] = false;
    }
    std::vector<PlacementRecord> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (keep[i]) out.push_back(records[i]);
    }
    return out;
}

const Image& Dataset::image(const std::string& ref) const {
    auto it = images.find(ref);
    if (it == images.end()) throw DataError("dataset has no image " + ref);
    return it->second;
}

std::vector<const PlacementRecord*> Dataset::select(Split s, std::optional<StyleLabel> style) const {
    std::vector<const PlacementRecord*> out;
    for (const auto& r : records) {
        if (style && r.style_label != *style) continue;
        if (split.at(r.sticker_id) != s) continue;
        out.push_back(&r);
    }
    return out;
}

std::string host_mask_ref(const std::string& host_ref) {
    const std::filesystem::path p(host_ref);
    return (std::filesystem::path("masks") / p.filename()).generic_string();
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_manifest(dir / kManifestFile, ds.records);
    if (!ds.split.empty()) write_split_file(dir / kSplitFile, ds.split);

    std::ofstream cand(dir / kCandidatesFile, std::ios::trunc);
    for (const auto& id : label_filter_candidates(coverage_by_sticker(ds.records))) cand << id << '\n';

    for (const auto& [ref, img] : ds.images) {
        const fs::path p = dir / ref;
        fs::create_directories(p.parent_path());
        write_png(p, img);
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
    const fs::path manifest = dir / kManifestFile;
    if (!fs::exists(manifest)) throw DataError("no " + std::string(kManifestFile) + " in " + dir.string());

    Dataset ds;
    ds.records = read_manifest(manifest);
    if (ds.records.empty()) throw DataError("dataset " + dir.string() + " has no records");
    if (fs::exists(dir / kSplitFile)) ds.split = read_split_file(dir / kSplitFile);

    auto load = [&](const std::string& ref) {
        if (ds.images.count(ref) != 0) return;
        ds.images.emplace(ref, read_png(dir / ref));
    };
    for (const auto& r : ds.records) {
        load(r.host_ref);
        load(r.sticker_ref);
        if (fs::exists(dir / host_mask_ref(r.host_ref))) load(host_mask_ref(r.host_ref));
        if (r.mask_ref) load(*r.mask_ref);
    }
    return ds;
}

}  // namespace stickernet::dataio
