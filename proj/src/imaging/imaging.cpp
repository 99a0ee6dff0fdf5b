#include "dermflow/imaging.hpp"

#include "dermflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace dermflow::imaging {

namespace {

void check_dimensions(int width, int height) {
    if (width < 1 || height < 1) {
        throw InvalidArgument("image dimensions must be at least 1x1, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
}

std::size_t pixel_count(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) {
        throw InvalidArgument("mask dimensions differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                              " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
}

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Op op) {
    require_same_shape(a, b);
    BinaryMask out(a.width(), a.height());
    auto lhs = a.bits();
    auto rhs = b.bits();
    auto dst = out.bits();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = op(lhs[i] != 0, rhs[i] != 0) ? 1 : 0;
    }
    return out;
}

int round_half_up(double v) noexcept {
    return static_cast<int>(std::floor(v + 0.5));
}

}  // namespace

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    check_dimensions(width, height);
    pixels_.assign(pixel_count(width, height), fill);
}

RasterImage::RasterImage(int width, int height, std::vector<Rgb> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dimensions(width, height);
    if (pixels_.size() != pixel_count(width, height)) {
        throw InvalidArgument("pixel buffer size does not match width x height");
    }
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    check_dimensions(width, height);
    values_.assign(pixel_count(width, height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_dimensions(width, height);
    if (values_.size() != pixel_count(width, height)) {
        throw InvalidArgument("intensity buffer size does not match width x height");
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
    check_dimensions(width, height);
    bits_.assign(pixel_count(width, height), fill ? 1 : 0);
}

std::uint8_t luma(Rgb p) noexcept {
    // Integer form of round(0.299 R + 0.587 G + 0.114 B), exact for all 8-bit inputs.
    const int weighted = 299 * p.r + 587 * p.g + 114 * p.b;
    return static_cast<std::uint8_t>((weighted + 500) / 1000);
}

GrayImage to_grayscale(const RasterImage& image) {
    std::vector<std::uint8_t> values;
    values.reserve(image.pixels().size());
    for (const Rgb& p : image.pixels()) {
        values.push_back(luma(p));
    }
    return GrayImage(image.width(), image.height(), std::move(values));
}

std::size_t mask_area(const BinaryMask& mask) noexcept {
    auto bits = mask.bits();
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

PointF mask_centroid(const BinaryMask& mask) {
    long long sx = 0;
    long long sy = 0;
    long long n = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.get(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) {
        throw NoLesionError("empty mask: no lesion");
    }
    return {static_cast<double>(sx) / static_cast<double>(n), static_cast<double>(sy) / static_cast<double>(n)};
}

PointF reflect_point(PointF p, const Line& axis) noexcept {
    const double norm = std::hypot(axis.direction.x, axis.direction.y);
    const double ux = axis.direction.x / norm;
    const double uy = axis.direction.y / norm;
    const double dx = p.x - axis.origin.x;
    const double dy = p.y - axis.origin.y;
    const double along = dx * ux + dy * uy;
    // p' = o + 2 (d.u) u - d
    return {axis.origin.x + 2.0 * along * ux - dx, axis.origin.y + 2.0 * along * uy - dy};
}

BinaryMask reflect_mask(const BinaryMask& mask, const Line& axis) {
    if (mask_area(mask) == 0) {
        throw NoLesionError("empty mask: no lesion");
    }
    if (axis.direction.x == 0.0 && axis.direction.y == 0.0) {
        throw InvalidArgument("reflection axis has zero direction");
    }
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const PointF m = reflect_point({static_cast<double>(x), static_cast<double>(y)}, axis);
            if (mask.test(round_half_up(m.x), round_half_up(m.y))) {
                out.set(x, y);
            }
        }
    }
    return out;
}

double symmetric_difference_ratio(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b);
    std::size_t sym = 0;
    std::size_t uni = 0;
    auto lhs = a.bits();
    auto rhs = b.bits();
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const bool p = lhs[i] != 0;
        const bool q = rhs[i] != 0;
        sym += (p != q) ? 1 : 0;
        uni += (p || q) ? 1 : 0;
    }
    if (uni == 0) {
        return 0.0;
    }
    return static_cast<double>(sym) / static_cast<double>(uni);
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p && q; });
}

BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p || q; });
}

BinaryMask mask_xor(const BinaryMask& a, const BinaryMask& b) {
    return combine(a, b, [](bool p, bool q) { return p != q; });
}

BoundingBox bounding_box(const BinaryMask& mask) {
    BoundingBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.get(x, y)) {
                box.min_x = std::min(box.min_x, x);
                box.min_y = std::min(box.min_y, y);
                box.max_x = std::max(box.max_x, x);
                box.max_y = std::max(box.max_y, y);
            }
        }
    }
    if (box.max_x < 0) {
        throw NoLesionError("empty mask: no lesion");
    }
    return box;
}

BoundingBox expand(const BoundingBox& box, int margin, int width, int height) noexcept {
    return {std::max(0, box.min_x - margin), std::max(0, box.min_y - margin), std::min(width - 1, box.max_x + margin),
            std::min(height - 1, box.max_y + margin)};
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0) {
        throw InvalidArgument("dilation radius must be non-negative");
    }
    if (radius == 0) {
        return mask;
    }
    // Disk structuring element as per-row half widths.
    std::vector<int> half(static_cast<std::size_t>(radius) + 1);
    for (int dy = 0; dy <= radius; ++dy) {
        half[static_cast<std::size_t>(dy)] =
            static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
    }
    const int w = mask.width();
    const int h = mask.height();
    // Row-wise run expansion: for each source row, mark horizontal spans on target rows.
    BinaryMask out(w, h);
    std::vector<int> diff(static_cast<std::size_t>(w) + 1);
    for (int ty = 0; ty < h; ++ty) {
        std::fill(diff.begin(), diff.end(), 0);
        bool any = false;
        for (int dy = -radius; dy <= radius; ++dy) {
            const int sy = ty + dy;
            if (sy < 0 || sy >= h) {
                continue;
            }
            const int hw = half[static_cast<std::size_t>(std::abs(dy))];
            for (int sx = 0; sx < w; ++sx) {
                if (mask.get(sx, sy)) {
                    const int lo = std::max(0, sx - hw);
                    const int hi = std::min(w - 1, sx + hw);
                    ++diff[static_cast<std::size_t>(lo)];
                    --diff[static_cast<std::size_t>(hi) + 1];
                    any = true;
                }
            }
        }
        if (!any) {
            continue;
        }
        int run = 0;
        for (int x = 0; x < w; ++x) {
            run += diff[static_cast<std::size_t>(x)];
            if (run > 0) {
                out.set(x, ty);
            }
        }
    }
    return out;
}

ComponentLabels label_components(const BinaryMask& mask) {
    ComponentLabels result;
    result.width = mask.width();
    result.height = mask.height();
    result.labels.assign(mask.bits().size(), 0);
    const int w = mask.width();
    const int h = mask.height();
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };

    std::deque<Point> queue;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.get(x, y) || result.labels[idx(x, y)] != 0) {
                continue;
            }
            const int label = ++result.count;
            std::size_t size = 0;
            result.labels[idx(x, y)] = label;
            queue.push_back({x, y});
            while (!queue.empty()) {
                const Point p = queue.front();
                queue.pop_front();
                ++size;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if ((dx != 0 || dy != 0) && mask.test(nx, ny) && result.labels[idx(nx, ny)] == 0) {
                            result.labels[idx(nx, ny)] = label;
                            queue.push_back({nx, ny});
                        }
                    }
                }
            }
            result.sizes.push_back(size);
        }
    }
    return result;
}

BinaryMask component_mask(const ComponentLabels& labels, int label) {
    BinaryMask out(labels.width, labels.height);
    auto dst = out.bits();
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        dst[i] = labels.labels[i] == label ? 1 : 0;
    }
    return out;
}

BinaryMask fill_holes(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    BinaryMask outside(w, h);
    std::deque<Point> queue;
    auto seed = [&](int x, int y) {
        if (!mask.get(x, y) && !outside.get(x, y)) {
            outside.set(x, y);
            queue.push_back({x, y});
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    constexpr int kDx[] = {1, -1, 0, 0};
    constexpr int kDy[] = {0, 0, 1, -1};
    while (!queue.empty()) {
        const Point p = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int nx = p.x + kDx[k];
            const int ny = p.y + kDy[k];
            if (mask.in_bounds(nx, ny)) {
                seed(nx, ny);
            }
        }
    }
    BinaryMask out(w, h);
    auto src = outside.bits();
    auto dst = out.bits();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = src[i] != 0 ? 0 : 1;
    }
    return out;
}

}  // namespace dermflow::imaging
