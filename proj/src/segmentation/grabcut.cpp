#include "dermflow/error.hpp"
#include "dermflow/maxflow.hpp"
#include "dermflow/segmentation.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace dermflow::segmentation {

namespace {

struct Offset {
    int dx;
    int dy;
    double dist;
};

// Forward half of the neighborhood; each unordered pair is visited once.
std::vector<Offset> forward_offsets(int connectivity) {
    std::vector<Offset> offsets{{1, 0, 1.0}, {0, 1, 1.0}};
    if (connectivity == 8) {
        offsets.push_back({1, 1, std::numbers::sqrt2});
        offsets.push_back({-1, 1, std::numbers::sqrt2});
    }
    return offsets;
}

Color to_color(imaging::Rgb p) {
    return {static_cast<double>(p.r), static_cast<double>(p.g), static_cast<double>(p.b)};
}

double squared_distance(imaging::Rgb a, imaging::Rgb b) {
    const double dr = static_cast<double>(a.r) - b.r;
    const double dg = static_cast<double>(a.g) - b.g;
    const double db = static_cast<double>(a.b) - b.b;
    return dr * dr + dg * dg + db * db;
}

/// Precomputed n-link weights. weights[k][i] is the weight between pixel i and
/// its neighbor at offsets[k], or 0 when that neighbor is outside the frame.
struct PairwiseTerms {
    std::vector<Offset> offsets;
    std::vector<std::vector<double>> weights;
};

PairwiseTerms pairwise_terms(const RasterImage& image, double gamma, double beta, int connectivity) {
    PairwiseTerms terms;
    terms.offsets = forward_offsets(connectivity);
    const int w = image.width();
    const int h = image.height();
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    for (const Offset& o : terms.offsets) {
        std::vector<double> weights(n, 0.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int nx = x + o.dx;
                const int ny = y + o.dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                    continue;
                }
                const double d2 = squared_distance(image.at(x, y), image.at(nx, ny));
                weights[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] =
                    gamma * std::exp(-beta * d2) / o.dist;
            }
        }
        terms.weights.push_back(std::move(weights));
    }
    return terms;
}

double energy_of(const std::vector<Color>& colors, const BinaryMask& labeling, const GaussianMixture& fg,
                 const GaussianMixture& bg, const PairwiseTerms& terms) {
    const int w = labeling.width();
    const int h = labeling.height();
    auto bits = labeling.bits();
    double data = 0.0;
    for (std::size_t i = 0; i < colors.size(); ++i) {
        data += bits[i] != 0 ? fg.min_cost(colors[i]) : bg.min_cost(colors[i]);
    }
    double smooth = 0.0;
    for (std::size_t k = 0; k < terms.offsets.size(); ++k) {
        const Offset& o = terms.offsets[k];
        const auto& weights = terms.weights[k];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int nx = x + o.dx;
                const int ny = y + o.dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                    continue;
                }
                if (labeling.get(x, y) != labeling.get(nx, ny)) {
                    smooth += weights[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
                }
            }
        }
    }
    return data + smooth;
}

/// Fit one mixture per class from explicit per-pixel component indices.
void fit_mixtures(const std::vector<Color>& colors, const BinaryMask& labeling, const std::vector<int>& component,
                  int component_count, double regularization, GaussianMixture& fg, GaussianMixture& bg) {
    std::vector<Color> fg_samples;
    std::vector<Color> bg_samples;
    std::vector<int> fg_assign;
    std::vector<int> bg_assign;
    auto bits = labeling.bits();
    for (std::size_t i = 0; i < colors.size(); ++i) {
        if (bits[i] != 0) {
            fg_samples.push_back(colors[i]);
            fg_assign.push_back(component[i]);
        } else {
            bg_samples.push_back(colors[i]);
            bg_assign.push_back(component[i]);
        }
    }
    fg = GaussianMixture::fit(fg_samples, fg_assign, component_count, regularization);
    bg = GaussianMixture::fit(bg_samples, bg_assign, component_count, regularization);
}

std::vector<int> initial_components(const std::vector<Color>& colors, const BinaryMask& labeling, int component_count) {
    std::vector<Color> fg_samples;
    std::vector<Color> bg_samples;
    auto bits = labeling.bits();
    for (std::size_t i = 0; i < colors.size(); ++i) {
        (bits[i] != 0 ? fg_samples : bg_samples).push_back(colors[i]);
    }
    const std::vector<int> fg_labels = split_clusters(fg_samples, component_count);
    const std::vector<int> bg_labels = split_clusters(bg_samples, component_count);
    std::vector<int> component(colors.size(), 0);
    std::size_t fi = 0;
    std::size_t bi = 0;
    for (std::size_t i = 0; i < colors.size(); ++i) {
        component[i] = bits[i] != 0 ? fg_labels[fi++] : bg_labels[bi++];
    }
    return component;
}

}  // namespace

void GrabCutParams::validate() const {
    if (gmm_components < 1) {
        throw InvalidArgument("gmm_components must be >= 1");
    }
    if (iterations < 1) {
        throw InvalidArgument("iterations must be >= 1");
    }
    if (!(gamma > 0.0)) {
        throw InvalidArgument("gamma must be > 0");
    }
    if (connectivity != 4 && connectivity != 8) {
        throw InvalidArgument("connectivity must be 4 or 8, got " + std::to_string(connectivity));
    }
    if (foreground_dilation < 0 || background_margin < 0) {
        throw InvalidArgument("trimap radii must be non-negative");
    }
    if (!(covariance_regularization > 0.0)) {
        throw InvalidArgument("covariance regularization must be > 0");
    }
}

double contrast_beta(const RasterImage& image, int connectivity) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (const Offset& o : forward_offsets(connectivity)) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                const int nx = x + o.dx;
                const int ny = y + o.dy;
                if (nx < 0 || ny < 0 || nx >= image.width() || ny >= image.height()) {
                    continue;
                }
                sum += squared_distance(image.at(x, y), image.at(nx, ny));
                ++pairs;
            }
        }
    }
    if (pairs == 0 || sum <= 0.0) {
        return 0.0;
    }
    return 1.0 / (2.0 * sum / static_cast<double>(pairs));
}

double grabcut_energy(const RasterImage& image, const BinaryMask& labeling, const GaussianMixture& foreground,
                      const GaussianMixture& background, double gamma, double beta, int connectivity) {
    std::vector<Color> colors;
    colors.reserve(image.pixels().size());
    for (const imaging::Rgb& p : image.pixels()) {
        colors.push_back(to_color(p));
    }
    return energy_of(colors, labeling, foreground, background, pairwise_terms(image, gamma, beta, connectivity));
}

GrabCutResult grabcut_refine_traced(const RasterImage& image, const BinaryMask& init, const GrabCutParams& params) {
    params.validate();
    if (init.width() != image.width() || init.height() != image.height()) {
        throw InvalidArgument("init mask dimensions do not match the image");
    }
    const std::size_t fg_count = imaging::mask_area(init);
    if (fg_count == 0 || fg_count == init.bits().size()) {
        throw UninitializedTrimap();
    }

    const int w = image.width();
    const int h = image.height();
    const imaging::BoundingBox region = imaging::expand(imaging::bounding_box(init), params.background_margin, w, h);

    BinaryMask labeling = imaging::dilate(init, params.foreground_dilation);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!region.contains(x, y)) {
                labeling.set(x, y, false);
            }
        }
    }

    std::vector<Color> colors;
    colors.reserve(image.pixels().size());
    for (const imaging::Rgb& p : image.pixels()) {
        colors.push_back(to_color(p));
    }

    const double beta = contrast_beta(image, params.connectivity);
    const PairwiseTerms terms = pairwise_terms(image, params.gamma, beta, params.connectivity);
    // Exceeds the total n-link weight any single pixel can carry, so a locked
    // pixel never pays less by switching to foreground.
    const double lock_cap = 1.0 + params.gamma * (4.0 + 4.0 / std::numbers::sqrt2);

    std::vector<int> component = initial_components(colors, labeling, params.gmm_components);
    GaussianMixture fg;
    GaussianMixture bg;
    fit_mixtures(colors, labeling, component, params.gmm_components, params.covariance_regularization, fg, bg);

    GrabCutResult result;
    for (int iter = 0; iter < params.iterations; ++iter) {
        if (iter > 0) {
            auto bits = labeling.bits();
            for (std::size_t i = 0; i < colors.size(); ++i) {
                component[i] = static_cast<int>((bits[i] != 0 ? fg : bg).best_component(colors[i]));
            }
            fit_mixtures(colors, labeling, component, params.gmm_components, params.covariance_regularization, fg, bg);
        }

        std::size_t edge_count = 0;
        for (const auto& wv : terms.weights) {
            edge_count += wv.size();
        }
        MaxFlowGraph graph(w * h, edge_count);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int node = y * w + x;
                const std::size_t i = static_cast<std::size_t>(node);
                if (!region.contains(x, y)) {
                    graph.add_terminal_weights(node, 0.0, lock_cap);
                    continue;
                }
                // Source side is foreground: the source arc is cut when the pixel
                // ends up background, so it carries the background cost.
                const double cost_fg = fg.min_cost(colors[i]);
                const double cost_bg = bg.min_cost(colors[i]);
                if (std::isinf(cost_fg) || std::isinf(cost_bg)) {
                    graph.add_terminal_weights(node, std::isinf(cost_bg) ? lock_cap : 0.0,
                                               std::isinf(cost_fg) ? lock_cap : 0.0);
                } else {
                    graph.add_terminal_weights(node, cost_bg, cost_fg);
                }
            }
        }
        for (std::size_t k = 0; k < terms.offsets.size(); ++k) {
            const Offset& o = terms.offsets[k];
            const auto& weights = terms.weights[k];
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const int nx = x + o.dx;
                    const int ny = y + o.dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                        continue;
                    }
                    const double wt = weights[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
                    if (wt > 0.0) {
                        graph.add_edge(y * w + x, ny * w + nx, wt, wt);
                    }
                }
            }
        }
        graph.solve();

        BinaryMask next(w, h);
        auto dst = next.bits();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = graph.in_source_segment(static_cast<int>(i)) ? 1 : 0;
        }

        const bool changed = next != labeling;
        labeling = std::move(next);
        result.energies.push_back(energy_of(colors, labeling, fg, bg, terms));
        result.iterations_run = iter + 1;
        if (!changed) {
            result.converged = true;
            break;
        }
        const std::size_t fg_now = imaging::mask_area(labeling);
        if (fg_now == 0) {
            break;
        }
    }
    result.mask = std::move(labeling);
    return result;
}

BinaryMask grabcut_refine(const RasterImage& image, const BinaryMask& init, const GrabCutParams& params) {
    return grabcut_refine_traced(image, init, params).mask;
}

}  // namespace dermflow::segmentation
