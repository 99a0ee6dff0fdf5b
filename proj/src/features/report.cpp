#include "dermflow/error.hpp"
#include "dermflow/features.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace dermflow::features {

namespace {

struct Field {
    std::string_view label;
    double LesionFeatures::*member;
    double ColorStd::*channel;
};

constexpr std::array<Field, 9> kFields = {{
    {"Lesion area (px^2)", &LesionFeatures::area, nullptr},
    {"Contour perimeter (px)", &LesionFeatures::perimeter, nullptr},
    {"Circularity index", &LesionFeatures::circularity, nullptr},
    {"Red channel standard deviation", nullptr, &ColorStd::r},
    {"Green channel standard deviation", nullptr, &ColorStd::g},
    {"Blue channel standard deviation", nullptr, &ColorStd::b},
    {"Asymmetry about the major axis", &LesionFeatures::asymmetry_major, nullptr},
    {"Asymmetry about the minor axis", &LesionFeatures::asymmetry_minor, nullptr},
    {"Average asymmetry", &LesionFeatures::asymmetry_avg, nullptr},
}};

double& slot(LesionFeatures& f, const Field& field) {
    return field.member ? f.*field.member : f.color_std.*field.channel;
}

double value(const LesionFeatures& f, const Field& field) {
    return field.member ? f.*field.member : f.color_std.*field.channel;
}

constexpr std::string_view kMethod =
    "Method: the image was converted to luma and split with Otsu's threshold; GrabCut refined the dark "
    "region and the largest outer contour was kept as the lesion. Circularity compares the region with a "
    "circle of equal perimeter (1 is a perfect circle). Asymmetry is the share of lesion pixels that do not "
    "coincide with their mirror image across a principal axis (0 is perfectly symmetric). Color spread is "
    "the standard deviation of each 8-bit channel over lesion pixels.";

constexpr std::string_view kNote =
    "Note to the reviewing model: treat these measurements as supporting evidence for the asymmetry, border "
    "and color criteria. Low circularity points to an irregular border, higher asymmetry to uneven halves and "
    "larger channel deviations to more varied pigmentation. Combine them with what is visible in the image.";

}  // namespace

TechnicalReport build_technical_report(const LesionFeatures& features) {
    std::ostringstream out;
    out << "Technical assessment of the segmented lesion\n\n" << kMethod << "\n\n";
    for (const Field& field : kFields) {
        out << field.label << ": " << format_number(value(features, field)) << '\n';
    }
    out << '\n' << kNote << '\n';
    TechnicalReport report;
    report.text = out.str();
    report.features = features;
    return report;
}

LesionFeatures parse_technical_report(std::string_view text) {
    LesionFeatures f;
    for (const Field& field : kFields) {
        std::string key(field.label);
        key += ": ";
        const std::size_t at = text.find(key);
        if (at == std::string_view::npos || (at > 0 && text[at - 1] != '\n')) {
            throw InvalidArgument("report is missing the line '" + std::string(field.label) + "'");
        }
        const char* begin = text.data() + at + key.size();
        const char* end = text.data() + text.size();
        double v = 0.0;
        const auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc{} || (res.ptr != end && *res.ptr != '\n')) {
            throw InvalidArgument("malformed number on the line '" + std::string(field.label) + "'");
        }
        slot(f, field) = v;
    }
    return f;
}

}  // namespace dermflow::features
