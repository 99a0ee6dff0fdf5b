#include "dermflow/features.hpp"
#include "dermflow/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dermflow::features {

namespace {

using imaging::Rgb;

constexpr Rgb kOutline{255, 32, 32};
constexpr Rgb kAxis{255, 215, 0};
constexpr Rgb kBoth{190, 190, 190};
constexpr Rgb kOnlyOriginal{215, 60, 60};
constexpr Rgb kOnlyMirror{60, 100, 220};

void put(RasterImage& img, int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) {
        img.at(x, y) = c;
    }
}

RasterImage dimmed(const RasterImage& image) {
    RasterImage out = image;
    for (Rgb& p : out.pixels()) {
        const auto g = static_cast<std::uint8_t>(imaging::luma(p) / 3);
        p = {g, g, g};
    }
    return out;
}

void draw_line(RasterImage& img, PointF origin, PointF dir) {
    const double reach = std::hypot(img.width(), img.height());
    for (double t = -reach; t <= reach; t += 0.5) {
        put(img, static_cast<int>(std::lround(origin.x + t * dir.x)), static_cast<int>(std::lround(origin.y + t * dir.y)), kAxis);
    }
}

PlotArtifact asymmetry_overlay(const RasterImage& image, const BinaryMask& region, const PrincipalAxes& axes, Axis which) {
    const PointF dir = which == Axis::Major ? axes.major_axis : axes.minor_axis;
    const BinaryMask mirror = imaging::reflect_mask(region, {axes.centroid, dir});
    RasterImage canvas = dimmed(image);
    for (int y = 0; y < canvas.height(); ++y) {
        for (int x = 0; x < canvas.width(); ++x) {
            const bool a = region.get(x, y);
            const bool b = mirror.get(x, y);
            if (a && b) {
                canvas.at(x, y) = kBoth;
            } else if (a) {
                canvas.at(x, y) = kOnlyOriginal;
            } else if (b) {
                canvas.at(x, y) = kOnlyMirror;
            }
        }
    }
    draw_line(canvas, axes.centroid, dir);
    return {which == Axis::Major ? "asymmetry_major" : "asymmetry_minor", imaging::encode_png(canvas)};
}

PlotArtifact color_histogram(const RasterImage& image, const BinaryMask& region) {
    std::array<std::array<std::size_t, 256>, 3> counts{};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (region.get(x, y)) {
                const Rgb p = image.at(x, y);
                ++counts[0][p.r];
                ++counts[1][p.g];
                ++counts[2][p.b];
            }
        }
    }
    std::size_t peak = 1;
    for (const auto& ch : counts) {
        peak = std::max(peak, *std::max_element(ch.begin(), ch.end()));
    }
    constexpr int kHeight = 160;
    constexpr std::array<Rgb, 3> kInk = {Rgb{220, 40, 40}, Rgb{40, 160, 40}, Rgb{40, 70, 220}};
    RasterImage canvas(256, kHeight, Rgb{255, 255, 255});
    for (int k = 0; k < 3; ++k) {
        int prev = -1;
        for (int v = 0; v < 256; ++v) {
            const int h = static_cast<int>(std::lround(static_cast<double>(counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)]) * (kHeight - 1) / static_cast<double>(peak)));
            const int y = kHeight - 1 - h;
            const int lo = prev < 0 ? y : std::min(prev, y);
            const int hi = prev < 0 ? y : std::max(prev, y);
            for (int yy = lo; yy <= hi; ++yy) {
                put(canvas, v, yy, kInk[static_cast<std::size_t>(k)]);
            }
            prev = y;
        }
    }
    return {"color_histogram", imaging::encode_png(canvas)};
}

}  // namespace

std::vector<PlotArtifact> render_plots(const RasterImage& image, const BinaryMask& region, const Contour& contour) {
    std::vector<PlotArtifact> plots;
    RasterImage outline = image;
    for (const imaging::Point& p : contour.points) {
        put(outline, p.x, p.y, kOutline);
        put(outline, p.x + 1, p.y, kOutline);
        put(outline, p.x, p.y + 1, kOutline);
    }
    plots.push_back({"outline", imaging::encode_png(outline)});
    const PrincipalAxes axes = principal_axes(region);
    plots.push_back(asymmetry_overlay(image, region, axes, Axis::Major));
    plots.push_back(asymmetry_overlay(image, region, axes, Axis::Minor));
    plots.push_back(color_histogram(image, region));
    return plots;
}

}  // namespace dermflow::features
