#pragma once

#include "bellsim/lattice_fock.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <memory>
#include <mutex>

namespace bellsim {

using Complex = std::complex<double>;
using SparseMatrixXcd = Eigen::SparseMatrix<Complex>;

/// Dirac matrices in the representation used throughout: alpha = sigma_1,
/// beta = sigma_3 for d = 2; standard Dirac alpha_1 and beta = diag(1,1,-1,-1) for d = 4.
Eigen::MatrixXcd dirac_alpha(int spinor_dim);
Eigen::MatrixXcd dirac_beta(int spinor_dim);

/// One-body lattice Dirac matrix h over the M modes:
/// -i alpha (psi(l+1) - psi(l-1)) / (2 lambda) + m beta psi(l), periodic in l.
Eigen::MatrixXcd single_particle_dirac(const LatticeSpec& spec);

/// Second quantization of a one-body matrix: sum_{mu,nu} h(mu,nu) psi^dagger_mu psi_nu on `sector`.
SparseMatrixXcd second_quantize(const SectorBasis& sector, const Eigen::MatrixXcd& one_body);

/// Sparse Hermitian operator on one sector with a lazily cached eigendecomposition.
class HamiltonianMatrix {
public:
    HamiltonianMatrix(std::shared_ptr<const SectorBasis> sector, SparseMatrixXcd entries);

    [[nodiscard]] const SectorBasis& sector() const { return *sector_; }
    [[nodiscard]] const std::shared_ptr<const SectorBasis>& sector_ptr() const { return sector_; }
    [[nodiscard]] const SparseMatrixXcd& matrix() const { return entries_; }
    [[nodiscard]] Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(entries_); }
    [[nodiscard]] Eigen::Index dim() const { return entries_.rows(); }

    [[nodiscard]] bool is_hermitian(double tol = 1e-12) const;

    /// Eigenvalues (ascending) and orthonormal eigenvectors; computed once, thread-safe.
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const;
    [[nodiscard]] const Eigen::MatrixXcd& eigenvectors() const;

    friend HamiltonianMatrix operator+(const HamiltonianMatrix& a, const HamiltonianMatrix& b);

private:
    struct Spectrum {
        std::once_flag once;
        Eigen::VectorXd values;
        Eigen::MatrixXcd vectors;
    };
    const Spectrum& spectrum() const;

    std::shared_ptr<const SectorBasis> sector_;
    SparseMatrixXcd entries_;
    std::shared_ptr<Spectrum> spectrum_;
};

HamiltonianMatrix build_free_hamiltonian(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector);

/// g * w * sum_l (psi^dagger(l) beta psi(l))^2 with w = lambda or lambda^3 per spec.interaction_scaling.
HamiltonianMatrix build_interaction(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector);

/// H_0 + H_I.
HamiltonianMatrix build_hamiltonian(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector);

/// Pilot state in a fixed fermion-number sector.
struct PilotState {
    std::shared_ptr<const SectorBasis> sector;
    Eigen::VectorXcd amplitudes;
    double time = 0.0;

    [[nodiscard]] double norm() const { return amplitudes.norm(); }
};

/// exp(-i H dt) applied through the cached eigendecomposition.
PilotState evolve(const PilotState& state, const HamiltonianMatrix& h, double dt);

/// <Psi|H|Psi>.
double energy(const PilotState& state, const HamiltonianMatrix& h);

/// P_n = sum over the q-class of n of |amplitude|^2, indexed like sector.configurations().
Eigen::VectorXd marginal_distribution(const PilotState& state);

} // namespace bellsim
