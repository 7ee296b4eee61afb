#include "bellsim/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bellsim {

std::size_t sample_categorical(const Eigen::VectorXd& weights, Rng& rng)
{
    const double u = uniform01(rng) * weights.sum();
    double acc = 0.0;
    Eigen::Index last = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (weights(i) <= 0.0) {
            continue;
        }
        acc += weights(i);
        last = i;
        if (u < acc) {
            return static_cast<std::size_t>(i);
        }
    }
    return static_cast<std::size_t>(last);
}

double multinomial_tv_quantile(const Eigen::VectorXd& target, std::size_t n, double quantile,
                               std::size_t replicates, std::uint64_t seed)
{
    if (n == 0) {
        throw std::invalid_argument("multinomial_tv_quantile: empty sample");
    }
    Eigen::VectorXd p = target.cwiseMax(0.0);
    p /= p.sum();
    Rng rng(seed);
    std::vector<double> tv(replicates);
    Eigen::VectorXd draw(p.size());
    for (std::size_t r = 0; r < replicates; ++r) {
        // Conditional binomials.
        std::uint64_t left = n;
        double mass = 1.0;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            std::uint64_t c = 0;
            if (left > 0 && mass > 0.0) {
                const double pk = std::clamp(p(k) / mass, 0.0, 1.0);
                c = (k + 1 == p.size()) ? left : std::binomial_distribution<std::uint64_t>(left, pk)(rng);
            }
            draw(k) = static_cast<double>(c);
            left -= c;
            mass -= p(k);
        }
        tv[r] = total_variation(draw / static_cast<double>(n), p);
    }
    std::sort(tv.begin(), tv.end());
    const auto idx = std::min(replicates - 1, static_cast<std::size_t>(std::ceil(quantile * replicates)) - 1);
    return tv[idx];
}

DistributionComparison compare_distribution(const Eigen::VectorXd& counts, const Eigen::VectorXd& target,
                                            std::optional<double> tolerance)
{
    if (counts.size() != target.size()) {
        throw std::invalid_argument("compare_distribution: size mismatch");
    }
    const double n = counts.sum();
    if (n <= 0.0) {
        throw std::invalid_argument("compare_distribution: empty ensemble");
    }
    DistributionComparison out;
    out.empirical = counts / n;
    out.target = target;
    out.tv_distance = total_variation(out.empirical, target);
    out.band95 = multinomial_tv_quantile(target, static_cast<std::size_t>(std::llround(n)));
    out.threshold = tolerance.value_or(out.band95);
    out.pass = out.tv_distance <= out.threshold + 1e-12;
    return out;
}

bool EquivarianceReport::pass() const
{
    return aborted == 0 && !checkpoints.empty()
           && std::all_of(checkpoints.begin(), checkpoints.end(),
                          [](const CheckpointReport& c) { return c.comparison.pass; });
}

} // namespace bellsim
