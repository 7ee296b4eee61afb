#pragma once

#include "bellsim/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace bellsim {

/// 1/2 * sum |p - q|.
template <typename DerivedA, typename DerivedB>
double total_variation(const Eigen::MatrixBase<DerivedA>& p, const Eigen::MatrixBase<DerivedB>& q)
{
    return 0.5 * (p - q).cwiseAbs().sum();
}

/// Index drawn from a probability vector (need not be exactly normalized).
std::size_t sample_categorical(const Eigen::VectorXd& weights, Rng& rng);

/// Quantile of the total-variation distance between a multinomial(n, target)
/// empirical distribution and target, by seeded Monte Carlo.
double multinomial_tv_quantile(const Eigen::VectorXd& target, std::size_t n, double quantile = 0.95,
                               std::size_t replicates = 2000, std::uint64_t seed = 0x5eedba11dULL);

struct DistributionComparison {
    Eigen::VectorXd empirical;
    Eigen::VectorXd target;
    double tv_distance = 0.0;
    double band95 = 0.0;
    /// Threshold actually applied: the explicit tolerance when given, otherwise band95.
    double threshold = 0.0;
    bool pass = false;
};

struct CheckpointReport {
    double time = 0.0;
    DistributionComparison comparison;
};

struct EquivarianceReport {
    std::size_t ensemble_size = 0;
    std::size_t aborted = 0;
    std::vector<CheckpointReport> checkpoints;

    /// Every checkpoint within its threshold and no aborted trajectory.
    [[nodiscard]] bool pass() const;
};

/// Compare histogram counts against a target distribution.
DistributionComparison compare_distribution(const Eigen::VectorXd& counts, const Eigen::VectorXd& target,
                                            std::optional<double> tolerance = std::nullopt);

} // namespace bellsim
