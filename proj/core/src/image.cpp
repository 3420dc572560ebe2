#include "stickernet/image.hpp"

#include <algorithm>
#include <cmath>

#include "stickernet/error.hpp"

namespace stickernet {

Image::Image(int w, int h, int c, std::uint8_t fill) : width(w), height(h), channels(c) {
    if (w < 0 || h < 0 || (c != 1 && c != 3 && c != 4)) throw InputError("Image: invalid dimensions");
    pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
}

Image to_rgba(const Image& img) {
    if (img.channels == 4) return img;
    Image out(img.width, img.height, 4);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, img.channels == 1 ? 0 : c);
            out.at(x, y, 3) = 255;
        }
    }
    return out;
}

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const int sum = img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2);
            out.at(x, y, 0) = static_cast<std::uint8_t>((sum + 1) / 3);
        }
    }
    return out;
}

double sample_bilinear(const Image& img, double u, double v, int channel) {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const double ax = u - fu;
    const double ay = v - fv;
    const int x0 = std::clamp(static_cast<int>(fu), 0, img.width - 1);
    const int x1 = std::clamp(static_cast<int>(fu) + 1, 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(fv), 0, img.height - 1);
    const int y1 = std::clamp(static_cast<int>(fv) + 1, 0, img.height - 1);
    const double top = (1.0 - ax) * img.at(x0, y0, channel) + ax * img.at(x1, y0, channel);
    const double bottom = (1.0 - ax) * img.at(x0, y1, channel) + ax * img.at(x1, y1, channel);
    return (1.0 - ay) * top + ay * bottom;
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

}  // namespace

Image resize_bilinear(const Image& img, int width, int height) {
    if (img.empty()) throw InputError("resize_bilinear: empty image");
    if (width < 1 || height < 1) throw InputError("resize_bilinear: target size must be positive");
    if (width == img.width && height == img.height) return img;
    Image out(width, height, img.channels);
    for (int y = 0; y < height; ++y) {
        const double v = resample_coord(y, img.height, height);
        for (int x = 0; x < width; ++x) {
            const double u = resample_coord(x, img.width, width);
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = to_byte(sample_bilinear(img, u, v, c));
        }
    }
    return out;
}

Image letterbox(const Image& img, int size) {
    const Image rgba = to_rgba(img);
    const double scale = static_cast<double>(size) / std::max(rgba.width, rgba.height);
    const int w = std::max(1, static_cast<int>(std::lround(rgba.width * scale)));
    const int h = std::max(1, static_cast<int>(std::lround(rgba.height * scale)));
    const Image fitted = resize_bilinear(rgba, w, h);
    Image out(size, size, 4, 0);
    const int x0 = (size - w) / 2;
    const int y0 = (size - h) / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 4; ++c) out.at(x0 + x, y0 + y, c) = fitted.at(x, y, c);
        }
    }
    return out;
}

Image crop(const Image& img, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || x0 + width > img.width || y0 + height > img.height) {
        throw InputError("crop: window outside image");
    }
    Image out(width, height, img.channels);
    for (int y = 0; y < height; ++y) {
        const auto* src = img.pixels.data() + img.offset(x0, y0 + y);
        std::copy(src, src + static_cast<std::size_t>(width) * img.channels, out.pixels.data() + out.offset(0, y));
    }
    return out;
}

void write_to_tensor(const Image& img, nn::Tensor4& t, int n, int channel_offset) {
    const auto& s = t.shape();
    if (s.h != img.height || s.w != img.width || channel_offset + img.channels > s.c) {
        throw InputError("write_to_tensor: image does not fit tensor " + nn::to_string(s));
    }
    for (int c = 0; c < img.channels; ++c) {
        double* plane = t.plane(n, channel_offset + c);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) plane[y * img.width + x] = img.at(x, y, c) / 255.0;
        }
    }
}

Image luminance_contrast_mask(const Image& img, double threshold) {
    const Image gray = to_gray(img);
    double border = 0.0;
    int count = 0;
    for (int x = 0; x < gray.width; ++x) {
        border += gray.at(x, 0, 0) + gray.at(x, gray.height - 1, 0);
        count += 2;
    }
    for (int y = 1; y + 1 < gray.height; ++y) {
        border += gray.at(0, y, 0) + gray.at(gray.width - 1, y, 0);
        count += 2;
    }
    border /= std::max(count, 1);
    Image mask(gray.width, gray.height, 1, 0);
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            mask.at(x, y, 0) = std::abs(gray.at(x, y, 0) - border) > threshold ? 255 : 0;
        }
    }
    return mask;
}

}  // namespace stickernet
