#include "stickernet/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "stickernet/error.hpp"
#include "stickernet/rng.hpp"

namespace stickernet::dataio {

bool filter_uses_mask(FilterKind k) { return k == FilterKind::stripes || k == FilterKind::texture; }
bool filter_reduces_opacity(FilterKind k) { return k == FilterKind::gradient || k == FilterKind::texture; }

namespace {

using Rgb = std::array<int, 3>;

constexpr std::uint64_t kStickerStream = 0x5354494B45525321ULL;
constexpr std::uint64_t kSceneStream = 0x5343454E45533031ULL;

std::string numbered(const char* prefix, std::size_t i, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, digits, i);
    return buf;
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Rgb vivid_color(Rng& rng) {
    // One channel high, one low, one random: a saturated hue.
    std::array<int, 3> order{0, 1, 2};
    for (int i = 2; i > 0; --i) std::swap(order[i], order[static_cast<int>(rng.uniform_int(0, i))]);
    Rgb c{};
    c[order[0]] = static_cast<int>(rng.uniform_int(200, 255));
    c[order[1]] = static_cast<int>(rng.uniform_int(0, 60));
    c[order[2]] = static_cast<int>(rng.uniform_int(0, 255));
    return c;
}

Rgb muted_color(Rng& rng) {
    const int base = static_cast<int>(rng.uniform_int(70, 170));
    return Rgb{base + static_cast<int>(rng.uniform_int(-25, 25)), base + static_cast<int>(rng.uniform_int(-25, 25)),
               base + static_cast<int>(rng.uniform_int(-25, 25))};
}

void put(Image& img, int x, int y, const Rgb& c, int alpha = 255) {
    for (int k = 0; k < 3; ++k) img.at(x, y, k) = clamp_byte(c[k]);
    if (img.channels == 4) img.at(x, y, 3) = static_cast<std::uint8_t>(alpha);
}

bool inside_ellipse(double px, double py, double cx, double cy, double rx, double ry) {
    const double dx = (px - cx) / rx;
    const double dy = (py - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
}

enum class GlyphShape { ellipse, diamond, rounded_rect, cross };

// Normalized glyph coverage test, (u, v) in [-1, 1]^2.
bool glyph_contains(GlyphShape s, double u, double v) {
    switch (s) {
        case GlyphShape::ellipse: return u * u + v * v <= 1.0;
        case GlyphShape::diamond: return std::abs(u) + std::abs(v) <= 1.0;
        case GlyphShape::rounded_rect: {
            const double du = std::max(std::abs(u) - 0.6, 0.0);
            const double dv = std::max(std::abs(v) - 0.6, 0.0);
            return du * du + dv * dv <= 0.16;
        }
        case GlyphShape::cross: return std::abs(u) <= 0.35 || std::abs(v) <= 0.35;
    }
    return false;
}

struct StickerSpec {
    std::string id;
    std::string ref;
    StyleLabel style = StyleLabel::sticker;
    FilterKind kind = FilterKind::gradient;
    Image image;
};

// Glyphs span the central 1/kGlyphInset of their canvas, so every sticker
// keeps a visible background margin.
constexpr double kGlyphInset = 1.25;

Image make_glyph(Rng& rng, const SynthConfig& cfg) {
    const double aspect = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    const int longest = static_cast<int>(rng.uniform_int(24, 48));
    const int w = aspect >= 1.0 ? longest : std::max(4, static_cast<int>(std::lround(longest * aspect)));
    const int h = aspect >= 1.0 ? std::max(4, static_cast<int>(std::lround(longest / aspect))) : longest;
    const auto shape = static_cast<GlyphShape>(rng.uniform_int(0, 3));
    const Rgb fill = vivid_color(rng);
    const Rgb edge{fill[0] / 2, fill[1] / 2, fill[2] / 2};
    const bool opaque = rng.bernoulli(cfg.opaque_glyph_rate);

    Image img(w, h, opaque ? 3 : 4, 0);
    const double edge_band = 2.0 * kGlyphInset / std::min(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = ((x + 0.5) / w * 2.0 - 1.0) * kGlyphInset;
            const double v = ((y + 0.5) / h * 2.0 - 1.0) * kGlyphInset;
            if (glyph_contains(shape, u, v)) {
                const bool inner = glyph_contains(shape, u * (1.0 + 2.0 * edge_band), v * (1.0 + 2.0 * edge_band));
                put(img, x, y, inner ? fill : edge, 255);
            } else {
                put(img, x, y, Rgb{255, 255, 255}, 0);
            }
        }
    }
    return img;
}

Image make_filter(FilterKind kind, Rng& rng, const SynthConfig& cfg) {
    const int s = cfg.filter_sticker_size;
    const Rgb a = vivid_color(rng);
    const Rgb b = vivid_color(rng);
    Image img(s, s, kind == FilterKind::frame ? 4 : 3, 0);
    switch (kind) {
        case FilterKind::gradient: {
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            const double gx = std::cos(angle);
            const double gy = std::sin(angle);
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    const double t = 0.5 + 0.5 * (((x + 0.5) / s - 0.5) * gx + ((y + 0.5) / s - 0.5) * gy) * 1.4;
                    const double tc = std::clamp(t, 0.0, 1.0);
                    put(img, x, y, Rgb{static_cast<int>(a[0] + (b[0] - a[0]) * tc),
                                       static_cast<int>(a[1] + (b[1] - a[1]) * tc),
                                       static_cast<int>(a[2] + (b[2] - a[2]) * tc)});
                }
            }
            break;
        }
        case FilterKind::stripes: {
            const int period = static_cast<int>(rng.uniform_int(8, 16));
            const int dir = static_cast<int>(rng.uniform_int(0, 1)) == 0 ? 1 : -1;
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    const int t = ((x + dir * y) % period + period) % period;
                    put(img, x, y, t < period / 2 ? a : b);
                }
            }
            break;
        }
        case FilterKind::texture: {
            const int cell = 6;
            const int n = s / cell + 1;
            std::vector<double> noise(static_cast<std::size_t>(n) * n);
            for (double& v : noise) v = rng.uniform();
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    const double t = noise[static_cast<std::size_t>(y / cell) * n + x / cell];
                    const double grain = rng.uniform(-0.1, 0.1);
                    const double m = std::clamp(t + grain, 0.0, 1.0);
                    put(img, x, y, Rgb{static_cast<int>(a[0] + (b[0] - a[0]) * m),
                                       static_cast<int>(a[1] + (b[1] - a[1]) * m),
                                       static_cast<int>(a[2] + (b[2] - a[2]) * m)});
                }
            }
            break;
        }
        case FilterKind::frame: {
            const int border = static_cast<int>(rng.uniform_int(8, 14));
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    const int d = std::min(std::min(x, y), std::min(s - 1 - x, s - 1 - y));
                    if (d < border) {
                        put(img, x, y, (d / 3) % 2 == 0 ? a : b, 255);
                    } else {
                        put(img, x, y, Rgb{0, 0, 0}, 0);
                    }
                }
            }
            break;
        }
    }
    return img;
}

struct Scene {
    Image host;
    Image mask;
    double centroid_x = 0.5;  // normalized
    double centroid_y = 0.5;
    double area = 0.0;        // normalized
};

Scene make_scene(Rng& rng, int size) {
    Scene sc;
    sc.host = Image(size, size, 4, 255);
    sc.mask = Image(size, size, 1, 0);

    const Rgb c0 = muted_color(rng);
    const Rgb c1 = muted_color(rng);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double gx = std::cos(angle);
    const double gy = std::sin(angle);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double t = std::clamp(0.5 + (((x + 0.5) / size - 0.5) * gx + ((y + 0.5) / size - 0.5) * gy), 0.0, 1.0);
            const double noise = rng.uniform(-10.0, 10.0);
            put(sc.host, x, y,
                Rgb{static_cast<int>(c0[0] + (c1[0] - c0[0]) * t + noise),
                    static_cast<int>(c0[1] + (c1[1] - c0[1]) * t + noise),
                    static_cast<int>(c0[2] + (c1[2] - c0[2]) * t + noise)});
        }
    }
    // Low-contrast distractor blobs.
    const int blobs = static_cast<int>(rng.uniform_int(1, 3));
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0.0, size);
        const double cy = rng.uniform(0.0, size);
        const double rx = rng.uniform(4.0, 12.0);
        const double ry = rng.uniform(4.0, 12.0);
        const int shift = static_cast<int>(rng.uniform_int(-22, 22));
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                if (!inside_ellipse(x + 0.5, y + 0.5, cx, cy, rx, ry)) continue;
                for (int k = 0; k < 3; ++k) sc.host.at(x, y, k) = clamp_byte(sc.host.at(x, y, k) + shift);
            }
        }
    }

    const Rgb color = vivid_color(rng);
    const bool ellipse = rng.bernoulli(0.6);
    const double rx = ellipse ? rng.uniform(7.0, 14.0) : rng.uniform(7.0, 13.0);
    const double ry = ellipse ? rng.uniform(7.0, 14.0) : rng.uniform(7.0, 13.0);
    const double cx = rng.uniform(rx + 2.0, size - rx - 2.0);
    const double cy = rng.uniform(ry + 2.0, size - ry - 2.0);

    double sx = 0.0;
    double sy = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            const bool in = ellipse ? inside_ellipse(px, py, cx, cy, rx, ry)
                                    : (std::abs(px - cx) <= rx && std::abs(py - cy) <= ry);
            if (!in) continue;
            put(sc.host, x, y, color);
            sc.mask.at(x, y, 0) = 255;
            sx += px;
            sy += py;
            ++count;
        }
    }
    sc.centroid_x = sx / static_cast<double>(count) / size;
    sc.centroid_y = sy / static_cast<double>(count) / size;
    sc.area = static_cast<double>(count) / (static_cast<double>(size) * size);
    return sc;
}

}  // namespace

Dataset synth_generate(std::size_t n, std::uint64_t seed, const SynthConfig& cfg) {
    if (n < 1) throw InputError("synth_generate: n must be >= 1");
    if (cfg.host_size < 16 || cfg.uses_per_sticker < 1 || cfg.filter_sticker_size < 8) {
        throw InputError("synth_generate: invalid configuration");
    }

    const std::size_t sticker_count =
        std::max(std::min<std::size_t>(n, 20), n / static_cast<std::size_t>(cfg.uses_per_sticker));
    const auto filter_count = static_cast<std::size_t>(std::llround(cfg.filter_fraction * sticker_count));

    Rng pick(mix_seed(seed, kStickerStream));
    std::vector<std::size_t> order(sticker_count);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = sticker_count; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
    }
    std::vector<bool> is_filter(sticker_count, false);
    for (std::size_t i = 0; i < filter_count; ++i) is_filter[order[i]] = true;

    Dataset ds;
    std::vector<StickerSpec> stickers(sticker_count);
    for (std::size_t j = 0; j < sticker_count; ++j) {
        Rng rng(mix_seed(seed ^ kStickerStream, j));
        StickerSpec& s = stickers[j];
        s.id = numbered("s", j, 5);
        s.ref = "stickers/" + s.id + ".png";
        if (is_filter[j]) {
            s.style = StyleLabel::filter;
            s.kind = static_cast<FilterKind>(rng.uniform_int(0, 3));
            s.image = make_filter(s.kind, rng, cfg);
        } else {
            s.style = StyleLabel::sticker;
            s.image = make_glyph(rng, cfg);
        }
        ds.images.emplace(s.ref, s.image);
    }

    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed ^ kSceneStream, i));
        const StickerSpec& s = stickers[i % sticker_count];
        Scene scene = make_scene(rng, cfg.host_size);

        PlacementRecord r;
        r.record_id = numbered("r", i, 6);
        r.sticker_id = s.id;
        r.host_ref = "hosts/" + numbered("h", i, 6) + ".png";
        r.sticker_ref = s.ref;
        r.style_label = s.style;
        if (s.style == StyleLabel::filter) {
            r.x = 0.0;
            r.y = 0.0;
            r.w = 1.0;
            r.h = 1.0;
            r.opacity = filter_reduces_opacity(s.kind) ? 0.6 : 1.0;
            if (filter_uses_mask(s.kind)) r.mask_ref = host_mask_ref(r.host_ref);
        } else {
            // Host is square, so the pixel aspect carries over to normalized units.
            const double aspect = static_cast<double>(s.image.width) / s.image.height;
            const double area = cfg.box_area_factor * scene.area;
            const double w = std::sqrt(area * aspect);
            const double h = std::sqrt(area / aspect);
            const auto box = geometry::Box::from_center(scene.centroid_x, scene.centroid_y, w, h);
            r.x = box.x;
            r.y = box.y;
            r.w = box.w;
            r.h = box.h;
            r.opacity = 1.0;
        }
        ds.images.emplace(r.host_ref, std::move(scene.host));
        ds.images.emplace(host_mask_ref(r.host_ref), std::move(scene.mask));
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace stickernet::dataio
