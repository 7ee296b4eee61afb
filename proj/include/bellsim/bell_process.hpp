#pragma once

#include "bellsim/dynamics.hpp"
#include "bellsim/errors.hpp"
#include "bellsim/statistics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bellsim {

/// Probability currents between configurations:
///   J(n, m) = 2 sum_{q,p} Re[ <Psi|nq> <nq|-iH|mp> <mp|Psi> ].
/// Antisymmetric; column sums give -dP_m/dt.
Eigen::MatrixXd probability_currents(const PilotState& state, const HamiltonianMatrix& h);

struct JumpRateTable {
    double time = 0.0;
    std::size_t source = 0;
    /// D_m, the marginal weight of the source configuration.
    double source_weight = 0.0;
    /// (n, T_nm) for every n with J_nm > 0, ascending in n.
    std::vector<std::pair<std::size_t, double>> rates;

    [[nodiscard]] double exit_rate() const;
};

/// T_nm = J_nm / D_m when J_nm > 0, else 0. Throws NodeVisitError when D_m < node_threshold.
JumpRateTable jump_rates(const PilotState& state, const HamiltonianMatrix& h, std::size_t source,
                         double node_threshold = 1e-12);

/// Exact pilot-state history Psi(t) = exp(-iH(t - t0)) Psi(t0), with currents
/// and marginals tabulated on the control grid t0 + k * dt_ctrl.
/// Read-only after construction; shared by every trajectory of an ensemble.
class PilotEvolution {
public:
    PilotEvolution(const PilotState& initial, HamiltonianMatrix h, double t_max, double dt_ctrl);

    [[nodiscard]] const HamiltonianMatrix& hamiltonian() const { return h_; }
    [[nodiscard]] const SectorBasis& sector() const { return h_.sector(); }
    [[nodiscard]] double start_time() const { return t0_; }
    [[nodiscard]] double end_time() const { return t_max_; }
    [[nodiscard]] double control_step() const { return dt_ctrl_; }
    [[nodiscard]] std::size_t grid_size() const { return grid_.size(); }
    [[nodiscard]] double grid_time(std::size_t k) const { return grid_[k]; }

    [[nodiscard]] PilotState state_at(double t) const;
    [[nodiscard]] Eigen::VectorXd marginal_at(double t) const;

    /// Jump rates out of `source` at grid point k (tabulated) or at an arbitrary time.
    [[nodiscard]] JumpRateTable rates_on_grid(std::size_t k, std::size_t source, double node_threshold) const;
    [[nodiscard]] JumpRateTable rates_at(double t, std::size_t source, double node_threshold) const;

private:
    HamiltonianMatrix h_;
    std::shared_ptr<const SectorBasis> sector_;
    Eigen::VectorXcd spectral_coefficients_;
    double t0_;
    double t_max_;
    double dt_ctrl_;
    std::vector<double> grid_;
    std::vector<Eigen::MatrixXd> grid_currents_;
    std::vector<Eigen::VectorXd> grid_marginals_;
};

struct SamplerOptions {
    double dt_ctrl = 1e-3;
    double dt_floor = 1e-9;
    /// Bound on exit_rate * dt within one step.
    double max_jump_probability = 0.1;
    double node_threshold = 1e-12;
};

struct JumpEvent {
    double time;
    std::size_t from;
    std::size_t to;
};

/// Piecewise-constant path of configuration indices (into the sector's configurations()).
struct BeableTrajectory {
    std::uint64_t rng_seed = 0;
    double start_time = 0.0;
    double end_time = 0.0;
    std::size_t initial = 0;
    std::vector<JumpEvent> jumps;
    /// Set when the trajectory was aborted (node visit, step floor); end_time is the abort time.
    std::optional<std::string> abort_reason;

    [[nodiscard]] std::size_t configuration_at(double t) const;
    [[nodiscard]] std::vector<double> times() const;
    [[nodiscard]] std::vector<std::size_t> configurations() const;
};

/// Inhomogeneous jump process by thinning: on each control interval the step
/// is halved until exit_rate * dt <= max_jump_probability; a jump to n occurs
/// with probability T_nm * dt. Deterministic in `rng`.
BeableTrajectory sample_trajectory(const PilotEvolution& pilot, std::size_t initial, const SamplerOptions& options,
                                   Rng& rng);

BeableTrajectory sample_trajectory(const PilotEvolution& pilot, std::size_t initial, const SamplerOptions& options,
                                   std::uint64_t seed);

BeableTrajectory sample_trajectory(const PilotState& initial_state, std::size_t initial, const HamiltonianMatrix& h,
                                   double t_max, double dt_ctrl, std::uint64_t seed);

struct EnsembleOptions {
    std::size_t size = 0;
    SamplerOptions sampler;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
};

/// Trajectory i uses its own stream stream_seed(master_seed, i): the start
/// configuration is drawn from P(t0) first, then the path. The result does not
/// depend on the thread count. Aborted trajectories carry abort_reason.
std::vector<BeableTrajectory> sample_ensemble(const PilotEvolution& pilot, const EnsembleOptions& options);

/// Histogram of configurations occupied at each checkpoint, compared with the
/// target distribution. Aborted trajectories are counted but excluded.
EquivarianceReport equivariance_report(std::span<const BeableTrajectory> ensemble,
                                       const std::function<Eigen::VectorXd(double)>& target,
                                       std::span<const double> checkpoints,
                                       std::optional<double> tolerance = std::nullopt);

EquivarianceReport equivariance_report(std::span<const BeableTrajectory> ensemble, const PilotEvolution& pilot,
                                       std::span<const double> checkpoints,
                                       std::optional<double> tolerance = std::nullopt);

} // namespace bellsim
