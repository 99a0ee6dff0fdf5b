#include "dermflow/gmm.hpp"

#include "dermflow/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace dermflow::segmentation {

namespace {

constexpr double kHalfLogTwoPiCubed = 1.5 * 1.8378770664093453;  // 1.5 * log(2 pi)

struct Accumulator {
    std::size_t count = 0;
    Color sum = Color::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();

    void add(const Color& z) {
        ++count;
        sum += z;
        outer += z * z.transpose();
    }

    Color mean() const { return sum / static_cast<double>(count); }

    Eigen::Matrix3d covariance() const {
        const Color m = mean();
        return outer / static_cast<double>(count) - m * m.transpose();
    }
};

}  // namespace

GaussianMixture GaussianMixture::fit(std::span<const Color> samples, std::span<const int> assignment,
                                     int component_count, double regularization) {
    if (samples.size() != assignment.size()) {
        throw InvalidArgument("GMM fit: one assignment per sample required");
    }
    if (component_count < 1) {
        throw InvalidArgument("GMM fit: component count must be >= 1");
    }
    std::vector<Accumulator> acc(static_cast<std::size_t>(component_count));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int k = assignment[i];
        if (k < 0 || k >= component_count) {
            throw InvalidArgument("GMM fit: assignment out of range");
        }
        acc[static_cast<std::size_t>(k)].add(samples[i]);
    }

    GaussianMixture gmm;
    const double total = static_cast<double>(samples.size());
    for (const Accumulator& a : acc) {
        if (a.count == 0) {
            continue;
        }
        GaussianComponent c;
        c.weight = static_cast<double>(a.count) / total;
        c.mean = a.mean();
        Eigen::Matrix3d cov = a.covariance();
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal().array() += regularization;
        c.covariance = cov;
        Eigen::LDLT<Eigen::Matrix3d> ldlt(cov);
        c.inverse = ldlt.solve(Eigen::Matrix3d::Identity());
        c.log_det = ldlt.vectorD().array().log().sum();
        gmm.components_.push_back(c);
    }
    return gmm;
}

double GaussianMixture::component_cost(std::size_t k, const Color& z) const {
    const GaussianComponent& c = components_.at(k);
    const Color d = z - c.mean;
    return -std::log(c.weight) + 0.5 * c.log_det + 0.5 * d.dot(c.inverse * d) + kHalfLogTwoPiCubed;
}

std::size_t GaussianMixture::best_component(const Color& z) const {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const double cost = component_cost(k, z);
        if (cost < best_cost) {
            best_cost = cost;
            best = k;
        }
    }
    return best;
}

double GaussianMixture::min_cost(const Color& z) const {
    if (components_.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    return component_cost(best_component(z), z);
}

std::vector<int> split_clusters(std::span<const Color> samples, int component_count) {
    if (component_count < 1) {
        throw InvalidArgument("cluster count must be >= 1");
    }
    std::vector<int> label(samples.size(), 0);
    if (samples.empty()) {
        return label;
    }

    struct Cluster {
        Accumulator acc;
        double spread = 0.0;
        Color axis = Color::UnitX();
    };

    auto summarize = [&](int id) {
        Cluster c;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (label[i] == id) {
                c.acc.add(samples[i]);
            }
        }
        if (c.acc.count > 1) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(c.acc.covariance());
            // Eigenvalues come back in increasing order.
            c.spread = eig.eigenvalues()(2);
            c.axis = eig.eigenvectors().col(2);
        }
        return c;
    };

    std::vector<Cluster> clusters{summarize(0)};
    while (static_cast<int>(clusters.size()) < component_count) {
        int target = -1;
        double widest = 0.0;
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            if (clusters[k].spread > widest) {
                widest = clusters[k].spread;
                target = static_cast<int>(k);
            }
        }
        // Below this the cluster is a single repeated color up to rounding.
        if (target < 0 || widest < 1e-9) {
            break;
        }
        const Cluster& parent = clusters[static_cast<std::size_t>(target)];
        const Color pivot = parent.acc.mean();
        const Color axis = parent.axis;
        const int fresh = static_cast<int>(clusters.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (label[i] == target && axis.dot(samples[i] - pivot) > 0.0) {
                label[i] = fresh;
            }
        }
        clusters[static_cast<std::size_t>(target)] = summarize(target);
        clusters.push_back(summarize(fresh));
        if (clusters.back().acc.count == 0 || clusters[static_cast<std::size_t>(target)].acc.count == 0) {
            // Nothing on one side: undo and never try this cluster again.
            for (std::size_t i = 0; i < samples.size(); ++i) {
                if (label[i] == fresh) {
                    label[i] = target;
                }
            }
            clusters.pop_back();
            clusters[static_cast<std::size_t>(target)] = summarize(target);
            clusters[static_cast<std::size_t>(target)].spread = 0.0;
        }
    }
    return label;
}

}  // namespace dermflow::segmentation
