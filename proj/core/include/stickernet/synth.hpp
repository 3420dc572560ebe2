#pragma once

#include <cstdint>

#include "stickernet/dataio.hpp"

namespace stickernet::dataio {

struct SynthConfig {
    int host_size = 64;
    int filter_sticker_size = 96;
    /// Fraction of stickers (and, since every sticker is used equally often,
    /// of records) that are filter-style.
    double filter_fraction = 0.2;
    int uses_per_sticker = 4;
    /// Ground-truth box area as a multiple of the target's area.
    double box_area_factor = 1.2;
    /// Fraction of glyph stickers stored without an alpha channel.
    double opaque_glyph_rate = 0.15;
};

/// Filter-sticker families; each fixes the sticker's mask/opacity labels.
enum class FilterKind { gradient, stripes, texture, frame };
bool filter_uses_mask(FilterKind k);
bool filter_reduces_opacity(FilterKind k);

/// Generates n scenes. Every scene is a textured host with one salient target
/// and its exact foreground mask. Sticker-style records place a glyph with the
/// sticker's aspect ratio centered on the target centroid, with area
/// proportional to the target's; filter-style records cover the full canvas.
/// Output is a pure function of (n, seed, config). The split is left empty.
Dataset synth_generate(std::size_t n, std::uint64_t seed, const SynthConfig& config = {});

}  // namespace stickernet::dataio
