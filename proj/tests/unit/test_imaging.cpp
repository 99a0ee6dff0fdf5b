#include "dermflow/error.hpp"
#include "dermflow/image_io.hpp"
#include "dermflow/imaging.hpp"
#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace dermflow;
using namespace dermflow::imaging;
using dermflow::testing::count_set;
using dermflow::testing::disk_mask;
using dermflow::testing::ellipse_mask;
using dermflow::testing::rect_mask;

namespace {

const std::string kImages = std::string(DERMFLOW_FIXTURES_DIR) + "/images/";

GrayImage gray_of(Rgb p) {
    return to_grayscale(RasterImage(1, 1, p));
}

BinaryMask random_mask(std::mt19937& rng, int w, int h, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            m.set(x, y, on(rng));
        }
    }
    return m;
}

}  // namespace

TEST_CASE("to_grayscale maps extremes and a hand-evaluated pixel") {
    CHECK(gray_of({255, 255, 255}).at(0, 0) == 255);
    CHECK(gray_of({0, 0, 0}).at(0, 0) == 0);
    // 0.299*100 + 0.587*150 + 0.114*200 = 29.9 + 88.05 + 22.8 = 140.75
    CHECK(gray_of({100, 150, 200}).at(0, 0) == 141);
}

TEST_CASE("to_grayscale agrees with the floating formula away from rounding ties") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> byte(0, 255);
    int checked = 0;
    for (int i = 0; i < 20000; ++i) {
        const Rgb p{static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                    static_cast<std::uint8_t>(byte(rng))};
        const double exact = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
        if (std::abs(exact - std::floor(exact) - 0.5) < 1e-6) {
            continue;
        }
        const int oracle = static_cast<int>(std::lround(exact));
        CHECK(static_cast<int>(luma(p)) == oracle);
        CHECK(oracle >= 0);
        CHECK(oracle <= 255);
        ++checked;
    }
    CHECK(checked > 19000);
}

TEST_CASE("to_grayscale keeps dimensions and is identical on gray pixels") {
    RasterImage img(3, 2);
    for (int v = 0; v < 6; ++v) {
        const auto g = static_cast<std::uint8_t>(v * 40);
        img.at(v % 3, v / 3) = {g, g, g};
    }
    const GrayImage gray = to_grayscale(img);
    REQUIRE(gray.width() == 3);
    REQUIRE(gray.height() == 2);
    for (int v = 0; v < 6; ++v) {
        CHECK(gray.at(v % 3, v / 3) == v * 40);
    }
}

TEST_CASE("images reject zero dimensions and mismatched buffers") {
    CHECK_THROWS_AS(RasterImage(0, 4), InvalidArgument);
    CHECK_THROWS_AS(BinaryMask(3, 0), InvalidArgument);
    CHECK_THROWS_AS(RasterImage(2, 2, std::vector<Rgb>(3)), InvalidArgument);
}

TEST_CASE("mask_area") {
    CHECK(mask_area(BinaryMask(10, 10)) == 0);
    CHECK(mask_area(BinaryMask(10, 10, true)) == 100);
    // Independent count of x^2 + y^2 <= 1600 lattice points.
    const BinaryMask disk = disk_mask(101, 101, 50, 50, 40);
    CHECK(mask_area(disk) == 5025);
    CHECK(std::abs(static_cast<double>(mask_area(disk)) - std::numbers::pi * 1600) / (std::numbers::pi * 1600) < 0.02);
}

TEST_CASE("reflect_mask fixes a symmetric rectangle across its symmetry line") {
    const BinaryMask rect = rect_mask(12, 9, 2, 3, 7, 5);
    const PointF c = mask_centroid(rect);
    CHECK(c.x == doctest::Approx(4.5));
    CHECK(c.y == doctest::Approx(4.0));
    CHECK(reflect_mask(rect, {c, {0, 1}}) == rect);
    CHECK(reflect_mask(rect, {c, {1, 0}}) == rect);
}

TEST_CASE("reflect_mask keeps a single pixel at its own centroid") {
    BinaryMask m(5, 5);
    m.set(2, 3);
    const PointF c = mask_centroid(m);
    CHECK(reflect_mask(m, {c, {0, 1}}) == m);
    CHECK(reflect_mask(m, {c, {1, 1}}) == m);
}

TEST_CASE("reflect_mask mirrors an L shape across the vertical centroid line") {
    BinaryMask l(8, 8);
    for (int y = 1; y <= 5; ++y) {
        l.set(1, y);
    }
    for (int x = 2; x <= 3; ++x) {
        l.set(x, 5);
    }
    const PointF c = mask_centroid(l);  // x = (5*1 + 2 + 3) / 7
    const BinaryMask mirrored = reflect_mask(l, {c, {0, 1}});

    // Brute force: q is set iff the pixel at round_half_up(2 cx - qx) in the same row is set.
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const int sx = static_cast<int>(std::floor(2.0 * c.x - x + 0.5));
            const bool expected = sx >= 0 && sx < 8 && l.get(sx, y);
            CHECK_MESSAGE(mirrored.get(x, y) == expected, "cell " << x << "," << y);
        }
    }
    CHECK(mask_area(mirrored) == 7);
    CHECK_FALSE(mirrored == l);
}

TEST_CASE("reflect_mask on an empty mask signals no lesion") {
    CHECK_THROWS_AS(reflect_mask(BinaryMask(4, 4), {{1, 1}, {0, 1}}), NoLesionError);
}

TEST_CASE("reflect_mask drops mirror positions outside the frame") {
    BinaryMask m(6, 3);
    m.set(0, 1);
    m.set(1, 1);
    const BinaryMask out = reflect_mask(m, {{4.5, 1.0}, {0, 1}});
    // 0 -> 9 and 1 -> 8 are outside; nothing maps back in.
    CHECK(mask_area(out) == 0);
}

TEST_CASE("symmetric_difference_ratio") {
    const BinaryMask a = rect_mask(10, 10, 0, 0, 3, 3);
    CHECK(symmetric_difference_ratio(a, a) == 0.0);
    const BinaryMask b = rect_mask(10, 10, 5, 5, 8, 8);
    CHECK(symmetric_difference_ratio(a, b) == 1.0);
    const BinaryMask half = rect_mask(10, 10, 0, 0, 3, 1);
    CHECK(symmetric_difference_ratio(a, half) == 0.5);
    CHECK(symmetric_difference_ratio(BinaryMask(4, 4), BinaryMask(4, 4)) == 0.0);
    CHECK_THROWS_AS(symmetric_difference_ratio(BinaryMask(4, 4), BinaryMask(4, 5)), InvalidArgument);
}

TEST_CASE("property: area of XOR equals |a| + |b| - 2|a AND b|") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 40);
        const int h = 1 + static_cast<int>(rng() % 40);
        const double density = (rng() % 100) / 100.0;
        const BinaryMask a = random_mask(rng, w, h, density);
        const BinaryMask b = random_mask(rng, w, h, 1.0 - density);
        CHECK(mask_area(mask_xor(a, b)) + 2 * mask_area(mask_and(a, b)) == mask_area(a) + mask_area(b));
    }
}

namespace {

// Worst-case fraction of a random ellipse blob recovered by reflecting twice across a random
// line through its centroid, over blobs with at least `min_area` pixels.
double worst_double_reflection(std::size_t min_area, int trials, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 1.0;
    int done = 0;
    while (done < trials) {
        const double a = 5.0 + 45.0 * unit(rng);
        const double b = 5.0 + 45.0 * unit(rng);
        const BinaryMask blob = ellipse_mask(120, 120, 60 + unit(rng), 60 + unit(rng), a, b, std::numbers::pi * unit(rng));
        if (count_set(blob) < min_area) {
            continue;
        }
        ++done;
        const double theta = std::numbers::pi * unit(rng);
        const Line axis{mask_centroid(blob), {std::cos(theta), std::sin(theta)}};
        const BinaryMask twice = reflect_mask(reflect_mask(blob, axis), axis);
        worst = std::min(worst, static_cast<double>(mask_area(mask_and(blob, twice))) / static_cast<double>(mask_area(blob)));
    }
    return worst;
}

}  // namespace

TEST_CASE("property: reflecting twice recovers the blob up to rounding") {
    // Nearest-pixel sampling loses a share of boundary pixels that shrinks with size.
    CHECK(worst_double_reflection(1600, 300, 23) >= 0.99);
    CHECK(worst_double_reflection(100, 300, 31) >= 0.96);
}

TEST_CASE("reflecting twice across axis-aligned lines is exact") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const BinaryMask blob = ellipse_mask(64, 64, 32, 32, 4 + rng() % 20, 4 + rng() % 20, 0.3 * (rng() % 10));
        const PointF c = mask_centroid(blob);
        for (PointF dir : {PointF{1, 0}, PointF{0, 1}}) {
            const Line axis{{std::round(2 * c.x) / 2, std::round(2 * c.y) / 2}, dir};
            const BinaryMask twice = reflect_mask(reflect_mask(blob, axis), axis);
            CHECK(mask_area(mask_and(blob, twice)) == mask_area(blob));
        }
    }
}

TEST_CASE("dilate grows by a Euclidean disk") {
    BinaryMask m(21, 21);
    m.set(10, 10);
    const BinaryMask grown = dilate(m, 3);
    CHECK(grown == disk_mask(21, 21, 10, 10, 3));
    CHECK(dilate(m, 0) == m);
}

TEST_CASE("label_components uses 8-connectivity") {
    BinaryMask m(6, 6);
    m.set(0, 0);
    m.set(1, 1);  // diagonal neighbor, same component
    m.set(4, 4);
    const ComponentLabels labels = label_components(m);
    CHECK(labels.count == 2);
    CHECK(labels.at(0, 0) == labels.at(1, 1));
    CHECK(labels.sizes == std::vector<std::size_t>{2, 1});
}

TEST_CASE("fill_holes closes interior background") {
    BinaryMask ring = rect_mask(7, 7, 1, 1, 5, 5);
    ring.set(3, 3, false);
    CHECK(fill_holes(ring) == rect_mask(7, 7, 1, 1, 5, 5));
}

TEST_CASE("PNG encode/decode preserves pixels") {
    RasterImage img(5, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) {
            img.at(x, y) = {static_cast<std::uint8_t>(x * 50), static_cast<std::uint8_t>(y * 60), 7};
        }
    }
    const auto bytes = encode_png(img);
    CHECK(detect_format(bytes) == ImageFormat::Png);
    CHECK(decode_image(bytes) == img);
}

TEST_CASE("decode fixtures: PNG, grayscale PNG and JPEG") {
    const RasterImage png = load_image(kImages + "tiny.png");
    CHECK(png.width() == 8);
    CHECK(png.height() == 6);
    CHECK(png.at(0, 0) == Rgb{200, 170, 160});
    CHECK(png.at(4, 3) == Rgb{60, 40, 40});

    const RasterImage gray = load_image(kImages + "gray.png");
    CHECK(gray.at(0, 0).r == gray.at(0, 0).g);

    const RasterImage jpg = load_image(kImages + "tiny.jpg");
    CHECK(jpg.width() == 8);
    CHECK(jpg.height() == 6);
    CHECK(std::abs(int(jpg.at(0, 0).r) - 200) <= 4);
}

TEST_CASE("decode rejects other formats with a typed error") {
    CHECK_THROWS_AS(load_image(kImages + "not_image.txt"), UnsupportedFormat);
    const std::vector<std::uint8_t> truncated_png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A, 0, 0};
    CHECK_THROWS_AS(decode_image(truncated_png), UnsupportedFormat);
    const std::vector<std::uint8_t> truncated_jpeg = {0xFF, 0xD8, 0xFF, 0xE0, 0x00};
    CHECK_THROWS_AS(decode_image(truncated_jpeg), UnsupportedFormat);
}
