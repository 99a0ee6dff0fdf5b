#pragma once

#include "dermflow/gmm.hpp"
#include "dermflow/imaging.hpp"

#include <vector>

namespace dermflow::segmentation {

using imaging::BinaryMask;
using imaging::Contour;
using imaging::GrayImage;
using imaging::RasterImage;

struct OtsuResult {
    int threshold = 0;  // pixels with luma <= threshold form the darker class
    BinaryMask mask;    // foreground = darker class
};

/**
 * Otsu threshold over the 256-bin luma histogram.
 *
 * The darker class is {luma <= t} for t in [0, 254]. Between-class variance is
 * compared in exact integer arithmetic, so ties (flat stretches of the variance
 * curve between two modes) resolve to the smallest t deterministically.
 * Throws DegenerateHistogram if the image has a single intensity.
 */
OtsuResult otsu_threshold(const GrayImage& gray);

struct GrabCutParams {
    int gmm_components = 5;
    int iterations = 5;
    double gamma = 50.0;
    int connectivity = 8;  // 4 or 8
    /// Init foreground is grown by this radius to form the initial "probably foreground" labeling.
    int foreground_dilation = 10;
    /// Pixels outside the bounding box of the init dilated by this margin are locked to background.
    int background_margin = 20;
    double covariance_regularization = 1e-3;

    void validate() const;
};

struct GrabCutResult {
    BinaryMask mask;
    /// Total energy (data + smoothness) after each completed iteration.
    std::vector<double> energies;
    int iterations_run = 0;
    bool converged = false;  // stopped because the labeling did not change
};

/**
 * Iterated graph-cut refinement of a binary init.
 *
 * Each iteration assigns every pixel to its cheapest GMM component within its
 * current class, refits both mixtures by maximum likelihood, then solves an
 * s-t min-cut whose t-links are the per-class minimum component cost and whose
 * n-links are gamma * exp(-beta |z_m - z_n|^2) / dist(m, n).
 *
 * Throws UninitializedTrimap if init has no foreground or no background pixel.
 */
GrabCutResult grabcut_refine_traced(const RasterImage& image, const BinaryMask& init, const GrabCutParams& params = {});

BinaryMask grabcut_refine(const RasterImage& image, const BinaryMask& init, const GrabCutParams& params = {});

/// Contrast coefficient 1 / (2 <|z_m - z_n|^2>) over neighboring pairs; 0 for a flat image.
double contrast_beta(const RasterImage& image, int connectivity);

/// GrabCut energy of a labeling under fixed mixtures.
double grabcut_energy(const RasterImage& image, const BinaryMask& labeling, const GaussianMixture& foreground,
                      const GaussianMixture& background, double gamma, double beta, int connectivity);

/// One closed outer contour per 8-connected component, in row-major order of
/// each component's first pixel. Traced clockwise (image coordinates) through
/// boundary pixel centers with Moore-neighbor tracing. Components of one or
/// two pixels yield contours with that many points.
std::vector<Contour> extract_contours(const BinaryMask& mask);

/// Shoelace area over the contour vertices. Throws InvalidArgument below 3 points.
double contour_area(const Contour& contour);

/// Closed polyline length. Throws InvalidArgument below 3 points.
double contour_perimeter(const Contour& contour);

/// Contour with the largest shoelace area, first one on ties. Contours below
/// 3 points count as zero area. Throws NoLesionError on an empty list.
const Contour& largest_contour(const std::vector<Contour>& contours);

/// The 8-connected component of `mask` that `contour` was traced from, holes filled.
BinaryMask contour_region(const BinaryMask& mask, const Contour& contour);

struct LesionSegmentation {
    OtsuResult otsu;
    GrabCutResult refined;
    std::vector<Contour> contours;
    Contour lesion_contour;
    BinaryMask lesion_mask;  // region enclosed by lesion_contour
};

/// Otsu init, GrabCut refinement, contour extraction and largest-contour
/// selection. Throws NoLesionError if the refined mask is empty.
LesionSegmentation segment_lesion(const RasterImage& image, const GrabCutParams& params = {});

}  // namespace dermflow::segmentation
