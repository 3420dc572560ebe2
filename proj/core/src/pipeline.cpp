#include "stickernet/pipeline.hpp"

#include <algorithm>
#include <tuple>

#include "stickernet/error.hpp"

namespace stickernet::pipeline {

using dataio::PlacementRecord;
using dataio::StyleLabel;

StyleLabel resolve_style(const PlacementRecord& r, const std::set<std::string>& filter_candidates) {
    if (r.style_label != StyleLabel::unknown) return r.style_label;
    return filter_candidates.count(r.sticker_id) != 0 ? StyleLabel::filter : StyleLabel::sticker;
}

const Image& host_mask(const dataio::Dataset& ds, const PlacementRecord& r, std::vector<Image>& scratch) {
    if (auto it = ds.images.find(dataio::host_mask_ref(r.host_ref)); it != ds.images.end()) return it->second;
    scratch.push_back(luminance_contrast_mask(ds.image(r.host_ref)));
    return scratch.back();
}

namespace {

std::set<std::string> candidates_of(const dataio::Dataset& ds) {
    const bool any_unknown = std::any_of(ds.records.begin(), ds.records.end(),
                                         [](const auto& r) { return r.style_label == StyleLabel::unknown; });
    if (!any_unknown) return {};
    return dataio::label_filter_candidates(dataio::coverage_by_sticker(ds.records));
}

}  // namespace

std::vector<classifier::ClassifierSample> classifier_samples(const dataio::Dataset& ds, dataio::Split split) {
    if (ds.split.empty()) throw DataError("dataset has no split manifest");
    const auto candidates = candidates_of(ds);
    std::set<std::tuple<std::string, bool, bool, bool>> seen;
    std::vector<classifier::ClassifierSample> out;
    for (const auto& r : ds.records) {
        if (ds.split.at(r.sticker_id) != split) continue;
        classifier::TypeLabels labels;
        labels.is_filter = resolve_style(r, candidates) == StyleLabel::filter;
        labels.use_mask = labels.is_filter && r.use_mask();
        labels.transparency = labels.is_filter && r.transparency();
        if (!seen.emplace(r.sticker_id, labels.is_filter, labels.use_mask, labels.transparency).second) continue;
        out.push_back({&ds.image(r.sticker_ref), labels});
    }
    return out;
}

PlacementSet placement_samples(const dataio::Dataset& ds, dataio::Split split, std::size_t cap, std::uint64_t seed) {
    if (ds.split.empty()) throw DataError("dataset has no split manifest");
    const auto candidates = candidates_of(ds);
    std::vector<PlacementRecord> chosen;
    for (const auto& r : ds.records) {
        if (ds.split.at(r.sticker_id) == split && resolve_style(r, candidates) == StyleLabel::sticker) {
            chosen.push_back(r);
        }
    }
    const auto capped = dataio::sample_cap(chosen, cap, seed);
    std::set<std::string> keep;
    for (const auto& r : capped) keep.insert(r.record_id);

    PlacementSet set;
    // Masks estimated on the fly need stable addresses.
    std::size_t missing = 0;
    for (const auto& r : ds.records) {
        if (keep.count(r.record_id) != 0 && ds.images.count(dataio::host_mask_ref(r.host_ref)) == 0) ++missing;
    }
    set.scratch_masks.reserve(missing);
    for (const auto& r : ds.records) {
        if (keep.count(r.record_id) == 0) continue;
        placement::PlacementSample s;
        s.host = &ds.image(r.host_ref);
        s.mask = &host_mask(ds, r, set.scratch_masks);
        s.sticker = &ds.image(r.sticker_ref);
        s.gt = r.box();
        set.samples.push_back(s);
        set.records.push_back(&r);
    }
    return set;
}

std::vector<evalbench::EvalCase> eval_cases(const PlacementSet& set) {
    std::vector<evalbench::EvalCase> cases;
    cases.reserve(set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        cases.push_back({set.records[i]->record_id, s.host, s.mask, s.sticker, s.gt});
    }
    return cases;
}

evalbench::NamedMethod model_method(const placement::PlacementPredictor& model, std::string name) {
    const int size = model.config().input_size;
    return {std::move(name), [&model, size](const evalbench::EvalCase& c) {
                return model
                    .predict(placement::make_host_input(*c.host, *c.mask, size),
                             placement::make_placement_sticker(*c.sticker, size))
                    .box;
            }};
}

}  // namespace stickernet::pipeline
