#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dermflow::imaging {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 8-bit RGB raster.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, Rgb fill = {});
    RasterImage(int width, int height, std::vector<Rgb> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
    std::span<const Rgb> pixels() const noexcept { return pixels_; }
    std::span<Rgb> pixels() noexcept { return pixels_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

/// Row-major 8-bit luma.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0);
    GrayImage(int width, int height, std::vector<std::uint8_t> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    std::uint8_t at(int x, int y) const { return values_[index(x, y)]; }
    std::uint8_t& at(int x, int y) { return values_[index(x, y)]; }
    std::span<const std::uint8_t> values() const noexcept { return values_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> values_;
};

/// Foreground/background flag per pixel. Foreground is stored as 1.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool on = true) { bits_[index(x, y)] = on ? 1 : 0; }
    /// Out-of-bounds reads are background.
    bool test(int x, int y) const noexcept { return in_bounds(x, y) && bits_[index(x, y)] != 0; }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    bool same_shape(const BinaryMask& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct PointF {
    double x = 0.0;
    double y = 0.0;
};

/// Closed boundary polyline through pixel centers. The closing segment from
/// the last point back to the first is implicit.
struct Contour {
    std::vector<Point> points;

    friend bool operator==(const Contour&, const Contour&) = default;
};

struct BoundingBox {
    int min_x = 0;
    int min_y = 0;
    int max_x = 0;
    int max_y = 0;

    int width() const noexcept { return max_x - min_x + 1; }
    int height() const noexcept { return max_y - min_y + 1; }
    bool contains(int x, int y) const noexcept { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Oriented line through `origin` along the unit vector `direction`.
struct Line {
    PointF origin;
    PointF direction;
};

/// BT.601 luma, rounded to nearest.
GrayImage to_grayscale(const RasterImage& image);
std::uint8_t luma(Rgb pixel) noexcept;

std::size_t mask_area(const BinaryMask& mask) noexcept;

/// Mean coordinate of the foreground pixels. Throws NoLesionError on an empty mask.
PointF mask_centroid(const BinaryMask& mask);

/**
 * Mirror a mask across `axis`.
 *
 * Every output pixel q takes the value of the input at round(reflect(q)), rounding
 * half up. Since reflection is an involution this is the foreground-to-mirror map
 * without the holes a forward scatter leaves on oblique axes. Mirror positions
 * outside the frame read as background.
 *
 * Throws NoLesionError when the mask is empty.
 */
BinaryMask reflect_mask(const BinaryMask& mask, const Line& axis);

/// Reflect a point across a line (no rounding).
PointF reflect_point(PointF p, const Line& axis) noexcept;

/// |a XOR b| / |a OR b|, 0 when both are empty. Throws InvalidArgument on shape mismatch.
double symmetric_difference_ratio(const BinaryMask& a, const BinaryMask& b);

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_xor(const BinaryMask& a, const BinaryMask& b);

/// Tight box around the foreground. Throws NoLesionError on an empty mask.
BoundingBox bounding_box(const BinaryMask& mask);

/// Grow `box` by `margin` on every side, clipped to a width x height frame.
BoundingBox expand(const BoundingBox& box, int margin, int width, int height) noexcept;

/// Morphological dilation with a Euclidean disk of the given radius.
BinaryMask dilate(const BinaryMask& mask, int radius);

/// 8-connected component labels, 0 for background, components numbered from 1
/// in row-major order of their first pixel.
struct ComponentLabels {
    int width = 0;
    int height = 0;
    int count = 0;
    std::vector<int> labels;
    std::vector<std::size_t> sizes;  // sizes[k - 1] is the pixel count of component k

    int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

ComponentLabels label_components(const BinaryMask& mask);

/// Component `label` as its own mask.
BinaryMask component_mask(const ComponentLabels& labels, int label);

/// Fill background regions not 4-connected to the frame border.
BinaryMask fill_holes(const BinaryMask& mask);

}  // namespace dermflow::imaging
