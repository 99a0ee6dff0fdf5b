#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace dermflow::segmentation {

using Color = Eigen::Vector3d;

struct GaussianComponent {
    double weight = 0.0;
    Color mean = Color::Zero();
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Identity();
    Eigen::Matrix3d inverse = Eigen::Matrix3d::Identity();
    double log_det = 0.0;
};

/**
 * RGB Gaussian mixture with hard component assignments, as used by GrabCut.
 *
 * The cost of a color under component k is the negative log of
 * weight_k * N(z | mean_k, cov_k). Components with zero weight are dropped
 * when fitting, so `components()` may be shorter than the requested count.
 */
class GaussianMixture {
public:
    GaussianMixture() = default;

    /// Maximum-likelihood fit given a component index per sample. `regularization`
    /// is added to each covariance diagonal.
    static GaussianMixture fit(std::span<const Color> samples, std::span<const int> assignment, int component_count,
                               double regularization);

    const std::vector<GaussianComponent>& components() const noexcept { return components_; }
    bool empty() const noexcept { return components_.empty(); }

    double component_cost(std::size_t k, const Color& z) const;
    std::size_t best_component(const Color& z) const;
    /// min over components of component_cost.
    double min_cost(const Color& z) const;

private:
    std::vector<GaussianComponent> components_;
};

/**
 * Deterministic initial clustering by repeated principal-axis splitting
 * (Orchard-Bouman): start with one cluster and split the cluster with the
 * largest covariance eigenvalue at its mean along the matching eigenvector,
 * until `component_count` clusters exist or no cluster has spread left.
 * Returns a cluster index per sample.
 */
std::vector<int> split_clusters(std::span<const Color> samples, int component_count);

}  // namespace dermflow::segmentation
