#include <doctest.h>

#include <filesystem>

#include "stickernet/error.hpp"
#include "stickernet/image.hpp"
#include "stickernet/image_io.hpp"
#include "stickernet/rng.hpp"

using namespace stickernet;

namespace {

Image random_image(int w, int h, int c, Rng& rng) {
    Image img(w, h, c);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace

TEST_CASE("png round trip preserves pixels for every channel layout") {
    Rng rng(1);
    const auto dir = std::filesystem::temp_directory_path() / "stickernet_test_image";
    std::filesystem::create_directories(dir);
    for (int c : {1, 3, 4}) {
        const Image img = random_image(13, 7, c, rng);
        const auto path = dir / ("img" + std::to_string(c) + ".png");
        write_png(path, img);
        CHECK(read_png(path) == img);
    }
    CHECK_THROWS_AS(read_png(dir / "absent.png"), DataError);
}

TEST_CASE("channel conversions") {
    Image rgb(2, 1, 3);
    rgb.pixels = {10, 20, 30, 200, 100, 0};
    const Image rgba = to_rgba(rgb);
    CHECK(rgba.channels == 4);
    CHECK(rgba.at(0, 0, 2) == 30);
    CHECK(rgba.at(0, 0, 3) == 255);
    CHECK(rgba.at(1, 0, 3) == 255);
    const Image gray = to_gray(rgb);
    CHECK(gray.channels == 1);
    CHECK(gray.at(0, 0, 0) == 20);
    CHECK(gray.at(1, 0, 0) == 100);
}

TEST_CASE("bilinear sampling and resize") {
    Image img(2, 1, 1);
    img.pixels = {0, 100};
    CHECK(sample_bilinear(img, 0.0, 0.0, 0) == 0.0);
    CHECK(sample_bilinear(img, 0.5, 0.0, 0) == 50.0);
    CHECK(sample_bilinear(img, -3.0, 0.0, 0) == 0.0);
    CHECK(sample_bilinear(img, 7.0, 0.0, 0) == 100.0);

    const Image up = resize_bilinear(img, 4, 1);
    CHECK(up.pixels == std::vector<std::uint8_t>{0, 25, 75, 100});
    CHECK(resize_bilinear(up, 4, 1) == up);
    CHECK_THROWS_AS(resize_bilinear(img, 0, 1), InputError);
}

TEST_CASE("letterbox keeps aspect ratio on a transparent canvas") {
    Image wide(40, 20, 3, 200);
    const Image box = letterbox(wide, 16);
    CHECK(box.width == 16);
    CHECK(box.height == 16);
    CHECK(box.channels == 4);
    CHECK(box.at(8, 0, 3) == 0);
    CHECK(box.at(8, 3, 3) == 0);
    CHECK(box.at(8, 4, 3) == 255);
    CHECK(box.at(8, 11, 3) == 255);
    CHECK(box.at(8, 12, 3) == 0);
    CHECK(box.at(0, 8, 0) == 200);
}

TEST_CASE("crop and tensor conversion") {
    Rng rng(2);
    const Image img = random_image(6, 5, 4, rng);
    const Image part = crop(img, 1, 2, 3, 2);
    CHECK(part.at(0, 0, 1) == img.at(1, 2, 1));
    CHECK(part.at(2, 1, 3) == img.at(3, 3, 3));
    CHECK_THROWS_AS(crop(img, 4, 0, 3, 1), InputError);

    nn::Tensor4 t({2, 5, 5, 6});
    write_to_tensor(img, t, 1, 1);
    CHECK(t.at(1, 1, 0, 0) == img.at(0, 0, 0) / 255.0);
    CHECK(t.at(1, 4, 4, 5) == img.at(5, 4, 3) / 255.0);
    CHECK(t.at(0, 1, 0, 0) == 0.0);
    CHECK_THROWS_AS(write_to_tensor(img, t, 0, 2), InputError);
}

TEST_CASE("luminance contrast mask marks pixels unlike the border") {
    Image img(8, 8, 3, 30);
    for (int y = 3; y < 5; ++y) {
        for (int x = 2; x < 6; ++x) {
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 220;
        }
    }
    const Image mask = luminance_contrast_mask(img);
    int on = 0;
    for (auto p : mask.pixels) on += p == 255;
    CHECK(on == 8);
    CHECK(mask.at(2, 3, 0) == 255);
    CHECK(mask.at(0, 0, 0) == 0);
}
