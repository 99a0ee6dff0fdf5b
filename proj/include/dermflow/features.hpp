#pragma once

#include "dermflow/imaging.hpp"
#include "dermflow/segmentation.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dermflow::features {

using imaging::BinaryMask;
using imaging::Contour;
using imaging::PointF;
using imaging::RasterImage;

struct ColorStd {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    friend bool operator==(const ColorStd&, const ColorStd&) = default;
};

struct LesionFeatures {
    double area = 0.0;       // pixels of the filled lesion region
    double perimeter = 0.0;  // contour polyline length
    double circularity = 0.0;
    double asymmetry_major = 0.0;
    double asymmetry_minor = 0.0;
    double asymmetry_avg = 0.0;
    ColorStd color_std;

    friend bool operator==(const LesionFeatures&, const LesionFeatures&) = default;
};

struct PrincipalAxes {
    PointF centroid;
    PointF major_axis;
    PointF minor_axis;
    double major_variance = 0.0;
    double minor_variance = 0.0;
};

enum class Axis { Major, Minor };

/// 4 pi area / perimeter^2, clamped to 1.05. Throws InvalidArgument unless both inputs are positive.
double circularity(double area, double perimeter);

/// Eigen-decomposition of the second central moments. Equal eigenvalues give major = (1, 0).
/// Axes point toward +x (toward +y when perpendicular to x). Throws DegenerateMask on
/// fewer than 3 pixels or collinear pixels.
PrincipalAxes principal_axes(const BinaryMask& mask);

/// Union-normalized symmetric difference between the mask and its reflection across the
/// chosen principal axis through the centroid.
double asymmetry(const BinaryMask& mask, Axis axis);

/// Population standard deviation per channel over mask pixels. Throws NoLesionError on an empty mask.
ColorStd color_variability(const RasterImage& image, const BinaryMask& mask);

/// Features of one lesion given its filled region and outer contour.
LesionFeatures compute_features(const RasterImage& image, const BinaryMask& region, const Contour& contour);

struct PlotArtifact {
    std::string name;  // file-name stem, e.g. "outline"
    std::vector<std::uint8_t> png;
};

struct TechnicalReport {
    std::string text;
    LesionFeatures features;
    std::vector<PlotArtifact> plots;
};

/// Deterministic report text. Every numeric field is printed in shortest round-trip form.
TechnicalReport build_technical_report(const LesionFeatures& features);

/// Inverse of the report text. Throws InvalidArgument when a field line is missing or malformed.
LesionFeatures parse_technical_report(std::string_view text);

/// Outline overlay, one overlay per asymmetry axis and a per-channel histogram of lesion pixels.
std::vector<PlotArtifact> render_plots(const RasterImage& image, const BinaryMask& region, const Contour& contour);

struct LesionAnalysis {
    segmentation::LesionSegmentation segmentation;
    TechnicalReport report;
};

/// Segment, measure, report and plot.
LesionAnalysis analyze_lesion(const RasterImage& image, const segmentation::GrabCutParams& params = {});

/// Shortest decimal that parses back to the same double.
std::string format_number(double value);

}  // namespace dermflow::features
