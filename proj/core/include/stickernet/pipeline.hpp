#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "stickernet/classifier.hpp"
#include "stickernet/dataio.hpp"
#include "stickernet/evalbench.hpp"
#include "stickernet/placement.hpp"

// Glue between an on-disk dataset and the trainable models.
namespace stickernet::pipeline {

/// Style of a record: its stored label, or the coverage heuristic when unknown.
dataio::StyleLabel resolve_style(const dataio::PlacementRecord& r, const std::set<std::string>& filter_candidates);

/// Foreground mask of a record's host: the stored mask when the dataset has
/// one, otherwise a luminance-contrast estimate kept in `scratch`.
const Image& host_mask(const dataio::Dataset& ds, const dataio::PlacementRecord& r, std::vector<Image>& scratch);

/// One sample per distinct (sticker, labels) pair in the split.
std::vector<classifier::ClassifierSample> classifier_samples(const dataio::Dataset& ds, dataio::Split split);

struct PlacementSet {
    std::vector<placement::PlacementSample> samples;
    std::vector<const dataio::PlacementRecord*> records;
    std::vector<Image> scratch_masks;
};

/// Sticker-style records of the split, at most `cap` per sticker.
PlacementSet placement_samples(const dataio::Dataset& ds, dataio::Split split, std::size_t cap, std::uint64_t seed);

std::vector<evalbench::EvalCase> eval_cases(const PlacementSet& set);

/// Evaluation method backed by a trained predictor; `model` must outlive it.
evalbench::NamedMethod model_method(const placement::PlacementPredictor& model, std::string name = "stickernet");

}  // namespace stickernet::pipeline
