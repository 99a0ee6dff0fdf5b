#include "dermflow/error.hpp"
#include "dermflow/features.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

namespace dermflow::features {

namespace {

using Wide = __int128;

PointF toward_positive(PointF v) {
    if (v.x < 0.0 || (v.x == 0.0 && v.y < 0.0)) {
        return {-v.x, -v.y};
    }
    return v;
}

}  // namespace

double circularity(double area, double perimeter) {
    if (!(area > 0.0) || !(perimeter > 0.0)) {
        throw InvalidArgument("circularity needs positive area and perimeter");
    }
    return std::min(4.0 * std::numbers::pi * area / (perimeter * perimeter), 1.05);
}

PrincipalAxes principal_axes(const BinaryMask& mask) {
    long long n = 0;
    long long sx = 0;
    long long sy = 0;
    long long sxx = 0;
    long long syy = 0;
    long long sxy = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.get(x, y)) {
                ++n;
                sx += x;
                sy += y;
                sxx += static_cast<long long>(x) * x;
                syy += static_cast<long long>(y) * y;
                sxy += static_cast<long long>(x) * y;
            }
        }
    }
    if (n < 3) {
        throw DegenerateMask("principal axes need at least 3 pixels, got " + std::to_string(n));
    }
    // n^2 times the central moments, exact.
    const Wide mxx = Wide(n) * sxx - Wide(sx) * sx;
    const Wide myy = Wide(n) * syy - Wide(sy) * sy;
    const Wide mxy = Wide(n) * sxy - Wide(sx) * sy;
    if (mxx * myy - mxy * mxy == 0) {
        throw DegenerateMask("mask pixels are collinear");
    }

    const double nn = static_cast<double>(n) * static_cast<double>(n);
    const double a = static_cast<double>(mxx) / nn;
    const double c = static_cast<double>(myy) / nn;
    const double b = static_cast<double>(mxy) / nn;

    PrincipalAxes axes;
    axes.centroid = {static_cast<double>(sx) / static_cast<double>(n), static_cast<double>(sy) / static_cast<double>(n)};
    const double root = std::hypot(a - c, 2.0 * b);
    axes.major_variance = (a + c + root) / 2.0;
    axes.minor_variance = (a + c - root) / 2.0;
    if (mxy == 0) {
        axes.major_axis = mxx >= myy ? PointF{1.0, 0.0} : PointF{0.0, 1.0};
    } else {
        const double theta = 0.5 * std::atan2(2.0 * b, a - c);
        axes.major_axis = toward_positive({std::cos(theta), std::sin(theta)});
    }
    axes.minor_axis = toward_positive({-axes.major_axis.y, axes.major_axis.x});
    return axes;
}

double asymmetry(const BinaryMask& mask, Axis axis) {
    const PrincipalAxes axes = principal_axes(mask);
    const imaging::Line line{axes.centroid, axis == Axis::Major ? axes.major_axis : axes.minor_axis};
    return imaging::symmetric_difference_ratio(mask, imaging::reflect_mask(mask, line));
}

ColorStd color_variability(const RasterImage& image, const BinaryMask& mask) {
    if (mask.width() != image.width() || mask.height() != image.height()) {
        throw InvalidArgument("mask and image sizes differ");
    }
    long long n = 0;
    long long sum[3] = {0, 0, 0};
    long long sq[3] = {0, 0, 0};
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!mask.get(x, y)) {
                continue;
            }
            const imaging::Rgb p = image.at(x, y);
            const long long v[3] = {p.r, p.g, p.b};
            ++n;
            for (int k = 0; k < 3; ++k) {
                sum[k] += v[k];
                sq[k] += v[k] * v[k];
            }
        }
    }
    if (n == 0) {
        throw NoLesionError();
    }
    double out[3];
    for (int k = 0; k < 3; ++k) {
        const Wide spread = Wide(n) * sq[k] - Wide(sum[k]) * sum[k];
        out[k] = std::sqrt(static_cast<double>(spread)) / static_cast<double>(n);
    }
    return {out[0], out[1], out[2]};
}

LesionFeatures compute_features(const RasterImage& image, const BinaryMask& region, const Contour& contour) {
    LesionFeatures f;
    f.area = static_cast<double>(imaging::mask_area(region));
    if (f.area == 0.0 || contour.points.size() < 3) {
        throw NoLesionError("lesion too small to measure");
    }
    f.perimeter = segmentation::contour_perimeter(contour);
    f.circularity = circularity(f.area, f.perimeter);
    f.asymmetry_major = asymmetry(region, Axis::Major);
    f.asymmetry_minor = asymmetry(region, Axis::Minor);
    f.asymmetry_avg = (f.asymmetry_major + f.asymmetry_minor) / 2.0;
    f.color_std = color_variability(image, region);
    return f;
}

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

LesionAnalysis analyze_lesion(const RasterImage& image, const segmentation::GrabCutParams& params) {
    LesionAnalysis out;
    out.segmentation = segmentation::segment_lesion(image, params);
    const LesionFeatures f = compute_features(image, out.segmentation.lesion_mask, out.segmentation.lesion_contour);
    out.report = build_technical_report(f);
    out.report.plots = render_plots(image, out.segmentation.lesion_mask, out.segmentation.lesion_contour);
    return out;
}

}  // namespace dermflow::features
