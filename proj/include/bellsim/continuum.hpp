#pragma once

// Deterministic guidance of particle positions in a periodic 1+1D box.
//
// One-body orbitals are the free Dirac plane waves
//   phi_j(t, x) = sqrt(m / (E ell)) w(p) exp(i kappa x - i eps t),
// with w = u(p), kappa = p, eps = +E on the positive branch and w = v(p),
// kappa = -p, eps = -E on the negative branch. Spinors carry the covariant
// normalization u^dagger u = v^dagger v = E / m, so every orbital has unit norm
// on [0, ell). Representation: alpha = sigma_1, beta = sigma_3.
//
// Two-quantum states hold a coefficient matrix C over orbital pairs, stored as
// a short sum of outer products; Psi_{ab}(x1, x2) = sum_ij C_ij phi_i,a(x1) phi_j,b(x2).
// Antisymmetric C gives a fermionic state; sum |C_ij|^2 = 1 is the unit norm.

#include "bellsim/errors.hpp"
#include "bellsim/lattice_fock.hpp"
#include "bellsim/statistics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bellsim {

/// X = (x_1, ..., x_omega), omega <= 2, stored inline.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 2, 1>;

/// Positive-energy spinor, u^dagger u = E / m.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> dirac_u(Scalar p, Scalar m)
{
    const Scalar e = std::sqrt(p * p + m * m);
    const Scalar n = std::sqrt(Scalar(2) * m * (e + m));
    return Eigen::Matrix<Scalar, 2, 1>(e + m, p) / n;
}

/// Negative-energy spinor of the solution v(p) exp(iEt - ipx), v^dagger v = E / m.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> dirac_v(Scalar p, Scalar m)
{
    const Scalar e = std::sqrt(p * p + m * m);
    const Scalar n = std::sqrt(Scalar(2) * m * (e + m));
    return Eigen::Matrix<Scalar, 2, 1>(p, e + m) / n;
}

enum class Branch { Positive, Negative };

struct Orbital {
    int wave_number = 0;
    Branch branch = Branch::Positive;
    /// Spatial wave number of exp(i kappa x).
    double kappa = 0.0;
    /// Signed energy eps.
    double energy = 0.0;
    /// sqrt(m / E) u(p) or sqrt(m / E) v(p): unit length.
    Eigen::Vector2d spinor;
};

class ModeBasis {
public:
    ModeBasis(double box_length, int n_max, double mass);

    [[nodiscard]] double box_length() const { return box_length_; }
    [[nodiscard]] int n_max() const { return n_max_; }
    [[nodiscard]] double mass() const { return mass_; }

    /// p_k = 2 pi k / ell.
    [[nodiscard]] double momentum(int k) const;
    [[nodiscard]] double energy(int k) const;
    [[nodiscard]] Eigen::Vector2d u(int k) const { return dirac_u(momentum(k), mass_); }
    [[nodiscard]] Eigen::Vector2d v(int k) const { return dirac_v(momentum(k), mass_); }

    [[nodiscard]] std::size_t size() const { return orbitals_.size(); }
    [[nodiscard]] const Orbital& orbital(std::size_t j) const { return orbitals_[j]; }
    [[nodiscard]] std::size_t index(int k, Branch branch) const;

private:
    double box_length_;
    int n_max_;
    double mass_;
    std::vector<Orbital> orbitals_;
};

class ContinuumState {
public:
    /// Coefficients over all orbitals of `basis`, taken at t = 0.
    static ContinuumState one_body(std::shared_ptr<const ModeBasis> basis, Eigen::VectorXcd coefficients,
                                   double time = 0.0);

    /// C = sum_r first_r * second_r^T.
    static ContinuumState two_body(std::shared_ptr<const ModeBasis> basis,
                                   std::vector<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> terms,
                                   double time = 0.0);

    /// Normalized antisymmetrization of two one-quantum states.
    static ContinuumState slater(const ContinuumState& a, const ContinuumState& b);

    /// Distinguishable product a(x1) b(x2); not a fermionic state, used as a reference.
    static ContinuumState product(const ContinuumState& a, const ContinuumState& b);

    [[nodiscard]] int omega() const { return omega_; }
    [[nodiscard]] double time() const { return time_; }
    [[nodiscard]] const ModeBasis& basis() const { return *basis_; }
    [[nodiscard]] const std::shared_ptr<const ModeBasis>& basis_ptr() const { return basis_; }

    /// Free evolution is exact: only the orbital phases move.
    [[nodiscard]] ContinuumState at_time(double t) const;

    [[nodiscard]] ContinuumState normalized() const;

    /// Column of coefficients (omega = 1) or the matrix C (omega = 2), at t = 0.
    [[nodiscard]] Eigen::MatrixXcd coefficient_matrix() const;

    /// Parseval norm: sum |c_j|^2 or sum |C_ij|^2, equal to the integral of rho.
    [[nodiscard]] double norm_squared() const;

    [[nodiscard]] bool is_antisymmetric(double tol = 1e-14) const;

    /// One-quantum spinor at (t, x).
    [[nodiscard]] Eigen::Vector2cd one_body_value(double t, double x) const;

    /// Two-quantum spinor tensor Psi_{a1 a2} at (t, x1, x2).
    [[nodiscard]] Eigen::Matrix2cd two_body_value(double t, double x1, double x2) const;

    /// Bulk evaluation on a set of points: entry f holds, column by column,
    /// sum_j factor_f(j) phi_j(t, x_i). omega = 1 has one factor; omega = 2
    /// has 2R factors, Psi(x1, x2) = sum_r F_2r(x1) F_2r+1(x2)^T.
    [[nodiscard]] std::vector<Eigen::Matrix2Xcd> factor_table(double t, std::span<const double> xs) const;

private:
    ContinuumState(std::shared_ptr<const ModeBasis> basis, int omega, double time);
    void restrict_to_active(const std::vector<Eigen::VectorXcd>& full);
    Eigen::Vector2cd factor_value(const Eigen::VectorXcd& coeffs, const Eigen::Matrix2Xcd& orbitals) const;
    Eigen::Matrix2Xcd orbital_values(double t, double x) const;

    std::shared_ptr<const ModeBasis> basis_;
    int omega_;
    double time_;
    std::vector<std::size_t> active_;
    // omega = 1: factors_[0]; omega = 2: pairs (factors_[2r], factors_[2r+1]). Over active orbitals.
    std::vector<Eigen::VectorXcd> factors_;
};

/// Psi_{a1..a_omega}(t, X) flattened with index a1 + 2 a2.
Eigen::VectorXcd evaluate_wavefunction(const ContinuumState& state, const Positions& x);

/// rho = sum |Psi_{a1..}|^2.
double density(const ContinuumState& state, const Positions& x);

/// j_i = sum Psi^* alpha Psi, alpha contracted on the i-th spinor slot.
Positions current(const ContinuumState& state, const Positions& x);

/// V = J / rho. Throws NodeVisitError when rho < node_threshold.
Positions velocity(const ContinuumState& state, const Positions& x, double node_threshold = 1e-10);

/// rho and J at an explicit time, one field evaluation.
struct FieldSample {
    double rho = 0.0;
    Positions current;
};
FieldSample sample_field(const ContinuumState& state, double t, const Positions& x);

struct IntegratorOptions {
    double dt = 1e-3;
    double dt_min = 1e-8;
    double node_threshold = 1e-10;
};

struct ContinuumTrajectory {
    std::vector<double> times;
    std::vector<Positions> positions;
};

/// Classical RK4 for dX/dt = V(t, X) from state.time() to t_end (either
/// direction). Steps that meet a node are halved down to dt_min, then the
/// integration aborts with NodeVisitError. Positions are wrapped into [0, ell).
ContinuumTrajectory integrate_trajectory(const ContinuumState& state, const Positions& x0, double t_end,
                                         const IntegratorOptions& options = {});

/// Same integrator without recording intermediate steps.
Positions advance(const ContinuumState& state, const Positions& x0, double t_from, double t_to,
                  const IntegratorOptions& options = {});

/// max |d rho / dt + div J| on a periodic grid with `points` nodes per axis:
/// central differences in time (step fd_dt, exact phases) and in space.
double continuity_residual(const ContinuumState& state, int points, double fd_dt = 1e-5);

/// L boxes of width lambda = ell / L; box l covers [l lambda, (l + 1) lambda).
struct CoarseGrid {
    double box_length;
    int boxes;

    CoarseGrid(double box_length, int boxes);
    [[nodiscard]] double width() const { return box_length / boxes; }
    [[nodiscard]] int box_of(double x) const;
};

/// n_l = number of particles in box l.
Configuration coarse_grain(const Positions& x, const CoarseGrid& grid);

/// Probability of each box (omega = 1) or ordered box pair, index b1 + boxes * b2 (omega = 2).
Eigen::VectorXd box_probabilities(const ContinuumState& state, const CoarseGrid& grid, int quadrature_order = 10);

/// Counts with the same indexing as box_probabilities.
Eigen::VectorXd box_histogram(std::span<const Positions> positions, const CoarseGrid& grid, int omega);

/// Probability of each coarse-grained configuration n.
std::map<Configuration, double> configuration_probabilities(const ContinuumState& state, const CoarseGrid& grid,
                                                            int quadrature_order = 10);

enum class Factorizability { Factorizable, NonFactorizable, Indeterminate };

std::string to_string(Factorizability f);

struct FactorizabilityResult {
    Eigen::VectorXd singular_values;
    double ratio = 0.0;
    Factorizability verdict = Factorizability::Indeterminate;
};

/// SVD of j_1 sampled on a points x points grid; rank one iff j_1 = j_A(x1) j_B(x2).
FactorizabilityResult nonfactorizability_check(const ContinuumState& state, int points, double threshold = 1e-6);

/// Upper bound on rho from a dense grid scan with a safety margin.
double density_bound(const ContinuumState& state, int points_per_axis = 0);

/// Rejection sample X ~ rho(t, X). Throws std::logic_error if rho exceeds `bound`.
Positions sample_position(const ContinuumState& state, double bound, Rng& rng);

struct ContinuumEnsembleOptions {
    std::size_t size = 0;
    std::vector<double> checkpoints;
    IntegratorOptions integrator;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
    /// Full step-by-step paths kept for the first `recorded_paths` members.
    std::size_t recorded_paths = 0;
};

struct ContinuumEnsemble {
    std::vector<Positions> initial;
    /// at_checkpoint[c][i]: member i at checkpoint c.
    std::vector<std::vector<Positions>> at_checkpoint;
    std::vector<std::optional<std::string>> abort_reason;
    std::vector<ContinuumTrajectory> paths;

    [[nodiscard]] std::size_t aborted() const;
};

/// Member i draws X0 ~ rho(t0) from stream stream_seed(master_seed, i) and is
/// then integrated through the checkpoints. Independent of the thread count.
ContinuumEnsemble run_continuum_ensemble(const ContinuumState& state, const ContinuumEnsembleOptions& options);

/// Box histograms of the ensemble against the coarse-grained rho at each checkpoint.
EquivarianceReport continuum_equivariance_report(const ContinuumState& state, const ContinuumEnsemble& ensemble,
                                                 std::span<const double> checkpoints, const CoarseGrid& grid,
                                                 std::optional<double> tolerance = std::nullopt);

} // namespace bellsim
