#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stickernet/geometry.hpp"
#include "stickernet/image.hpp"

namespace stickernet::dataio {

enum class StyleLabel { filter, sticker, unknown };

std::string_view to_string(StyleLabel s);
StyleLabel parse_style_label(std::string_view s);

/// One composition action: which sticker went onto which host, where, and how.
struct PlacementRecord {
    std::string record_id;
    std::string sticker_id;
    std::string host_ref;
    std::string sticker_ref;
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;
    double opacity = 1.0;
    double rotation_deg = 0.0;  // stored, never applied
    std::optional<std::string> mask_ref;
    StyleLabel style_label = StyleLabel::unknown;

    geometry::Box box() const { return geometry::Box{x, y, w, h}; }
    bool use_mask() const { return mask_ref.has_value(); }
    bool transparency() const { return opacity < 1.0; }
    double coverage() const { return w * h; }
    void validate() const;

    friend bool operator==(const PlacementRecord&, const PlacementRecord&) = default;
};

/// One JSON object per line, field names as in PlacementRecord.
std::string serialize_record(const PlacementRecord& r);
PlacementRecord parse_record(std::string_view line);

void write_manifest(const std::filesystem::path& path, std::span<const PlacementRecord> records);
std::vector<PlacementRecord> read_manifest(const std::filesystem::path& path);

enum class Split { train, val, test };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct SplitManifest {
    std::map<std::string, Split> assignment;

    bool empty() const { return assignment.empty(); }
    Split at(const std::string& sticker_id) const;
    std::set<std::string> ids(Split s) const;
    std::size_t count(Split s) const;
};

/// Deterministic sticker-level 90/5/5 split: stickers are ordered by a seeded
/// hash of their id and cut at exact counts (each split gets >= 1 sticker).
SplitManifest split_by_sticker(std::span<const PlacementRecord> records, std::uint64_t seed);

/// Two whitespace-separated columns per line: sticker_id split.
void write_split_file(const std::filesystem::path& path, const SplitManifest& m);
SplitManifest read_split_file(const std::filesystem::path& path);

/// A sticker is a filter candidate when at least half of its uses cover more
/// than half of the host.
std::set<std::string> label_filter_candidates(const std::map<std::string, std::vector<double>>& usages);

/// Coverage (box area over host area) of every use, grouped by sticker.
std::map<std::string, std::vector<double>> coverage_by_sticker(std::span<const PlacementRecord> records);

inline constexpr std::size_t kDefaultSampleCap = 300;

/// Keeps at most `cap` records per sticker, chosen uniformly without
/// replacement; relative record order is preserved.
std::vector<PlacementRecord> sample_cap(std::span<const PlacementRecord> records, std::size_t cap,
                                        std::uint64_t seed);

/// Records plus the images they reference, keyed by ref path.
struct Dataset {
    std::vector<PlacementRecord> records;
    std::map<std::string, Image> images;
    SplitManifest split;

    const Image& image(const std::string& ref) const;
    std::vector<const PlacementRecord*> select(Split s, std::optional<StyleLabel> style = std::nullopt) const;
};

/// Conventional location of a host's foreground mask.
std::string host_mask_ref(const std::string& host_ref);

inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kSplitFile = "splits.txt";
inline constexpr const char* kCandidatesFile = "filter_candidates.txt";

/// Writes manifest, split file, candidate list and every image as PNG.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
/// Loads manifest, split file (if present) and all referenced images.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace stickernet::dataio
