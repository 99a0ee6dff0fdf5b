#include "dermflow/error.hpp"
#include "dermflow/segmentation.hpp"

#include <cmath>
#include <cstdlib>
#include <optional>

namespace dermflow::segmentation {

namespace {

using imaging::Point;

// Clockwise on screen (y grows downward), starting east.
constexpr Point kRing[8] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};

int ring_index(Point offset) {
    for (int i = 0; i < 8; ++i) {
        if (kRing[i] == offset) {
            return i;
        }
    }
    return -1;
}

struct TraceState {
    Point at;
    Point backtrack;

    friend bool operator==(const TraceState&, const TraceState&) = default;
};

Contour trace_component(const imaging::ComponentLabels& labels, int label, Point start, std::size_t size) {
    auto member = [&](Point p) {
        return p.x >= 0 && p.y >= 0 && p.x < labels.width && p.y < labels.height && labels.at(p.x, p.y) == label;
    };

    Contour contour;
    contour.points.push_back(start);
    // start is the first pixel in raster order, so its west neighbor is outside the component.
    TraceState state{start, {start.x - 1, start.y}};
    std::optional<TraceState> first_move;
    const std::size_t limit = 8 * size + 16;

    for (std::size_t step = 0; step < limit; ++step) {
        const int from = ring_index({state.backtrack.x - state.at.x, state.backtrack.y - state.at.y});
        std::optional<TraceState> next;
        for (int i = 1; i <= 8; ++i) {
            const int idx = (from + i) % 8;
            const Point q{state.at.x + kRing[idx].x, state.at.y + kRing[idx].y};
            if (member(q)) {
                const Point& prev = kRing[(idx + 7) % 8];
                next = TraceState{q, {state.at.x + prev.x, state.at.y + prev.y}};
                break;
            }
        }
        if (!next) {
            break;  // isolated pixel
        }
        if (first_move && *next == *first_move) {
            break;
        }
        if (!first_move) {
            first_move = next;
        }
        contour.points.push_back(next->at);
        state = *next;
    }
    if (contour.points.size() > 1 && contour.points.back() == start) {
        contour.points.pop_back();
    }
    return contour;
}

double shoelace(const Contour& contour) {
    const auto& pts = contour.points;
    long long twice = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& a = pts[i];
        const Point& b = pts[(i + 1) % pts.size()];
        twice += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
    }
    return std::abs(static_cast<double>(twice)) / 2.0;
}

void require_polygon(const Contour& contour) {
    if (contour.points.size() < 3) {
        throw InvalidArgument("contour needs at least 3 points, got " + std::to_string(contour.points.size()));
    }
}

}  // namespace

std::vector<Contour> extract_contours(const BinaryMask& mask) {
    const imaging::ComponentLabels labels = imaging::label_components(mask);
    std::vector<Contour> contours;
    contours.reserve(static_cast<std::size_t>(labels.count));
    int next_label = 1;
    for (int y = 0; y < labels.height && next_label <= labels.count; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            if (labels.at(x, y) == next_label) {
                contours.push_back(trace_component(labels, next_label, {x, y}, labels.sizes[static_cast<std::size_t>(next_label - 1)]));
                ++next_label;
            }
        }
    }
    return contours;
}

double contour_area(const Contour& contour) {
    require_polygon(contour);
    return shoelace(contour);
}

double contour_perimeter(const Contour& contour) {
    require_polygon(contour);
    const auto& pts = contour.points;
    double length = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& a = pts[i];
        const Point& b = pts[(i + 1) % pts.size()];
        length += std::hypot(static_cast<double>(b.x - a.x), static_cast<double>(b.y - a.y));
    }
    return length;
}

const Contour& largest_contour(const std::vector<Contour>& contours) {
    if (contours.empty()) {
        throw NoLesionError("no lesion found");
    }
    std::size_t best = 0;
    double best_area = -1.0;
    for (std::size_t i = 0; i < contours.size(); ++i) {
        const double area = contours[i].points.size() < 3 ? 0.0 : shoelace(contours[i]);
        if (area > best_area) {
            best_area = area;
            best = i;
        }
    }
    return contours[best];
}

BinaryMask contour_region(const BinaryMask& mask, const Contour& contour) {
    if (contour.points.empty()) {
        throw InvalidArgument("empty contour");
    }
    const Point seed = contour.points.front();
    if (!mask.test(seed.x, seed.y)) {
        throw InvalidArgument("contour does not start on a foreground pixel of the mask");
    }
    const imaging::ComponentLabels labels = imaging::label_components(mask);
    return imaging::fill_holes(imaging::component_mask(labels, labels.at(seed.x, seed.y)));
}

LesionSegmentation segment_lesion(const RasterImage& image, const GrabCutParams& params) {
    LesionSegmentation seg;
    seg.otsu = otsu_threshold(imaging::to_grayscale(image));
    seg.refined = grabcut_refine_traced(image, seg.otsu.mask, params);
    seg.contours = extract_contours(seg.refined.mask);
    if (seg.contours.empty()) {
        throw NoLesionError("no lesion found");
    }
    seg.lesion_contour = largest_contour(seg.contours);
    seg.lesion_mask = contour_region(seg.refined.mask, seg.lesion_contour);
    return seg;
}

}  // namespace dermflow::segmentation
