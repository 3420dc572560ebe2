#include "stickernet/image_io.hpp"

#include <png.h>

#include <cstring>

#include "stickernet/error.hpp"

namespace stickernet {

Image read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
        throw DataError("cannot read PNG " + path.string() + ": " + image.message);
    }
    int channels = 1;
    if ((image.format & PNG_FORMAT_FLAG_ALPHA) != 0) {
        image.format = PNG_FORMAT_RGBA;
        channels = 4;
    } else if ((image.format & PNG_FORMAT_FLAG_COLOR) != 0) {
        image.format = PNG_FORMAT_RGB;
        channels = 3;
    } else {
        image.format = PNG_FORMAT_GRAY;
    }
    Image img(static_cast<int>(image.width), static_cast<int>(image.height), channels);
    if (png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr) == 0) {
        png_image_free(&image);
        throw DataError("malformed PNG " + path.string() + ": " + image.message);
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    switch (img.channels) {
        case 1: image.format = PNG_FORMAT_GRAY; break;
        case 3: image.format = PNG_FORMAT_RGB; break;
        case 4: image.format = PNG_FORMAT_RGBA; break;
        default: throw InputError("write_png: unsupported channel count");
    }
    if (img.width < 1 || img.height < 1) throw InputError("write_png: empty image");
    if (png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr) == 0) {
        throw DataError("cannot write PNG " + path.string() + ": " + image.message);
    }
}

}  // namespace stickernet
