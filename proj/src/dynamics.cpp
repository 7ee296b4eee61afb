#include "bellsim/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <vector>

namespace bellsim {

namespace {

using Triplet = Eigen::Triplet<Complex>;

constexpr Complex kI{0.0, 1.0};

void check_sector(const LatticeSpec& spec, const SectorBasis& sector)
{
    if (!(sector.spec().sites == spec.sites && sector.spec().spinor_dim == spec.spinor_dim)) {
        throw std::invalid_argument("hamiltonian: sector was built for a different lattice");
    }
}

} // namespace

Eigen::MatrixXcd dirac_alpha(int spinor_dim)
{
    Eigen::Matrix2cd sigma1;
    sigma1 << 0, 1, 1, 0;
    if (spinor_dim == 2) {
        return sigma1;
    }
    if (spinor_dim == 4) {
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(4, 4);
        a.topRightCorner<2, 2>() = sigma1;
        a.bottomLeftCorner<2, 2>() = sigma1;
        return a;
    }
    throw std::domain_error("dirac_alpha: spinor_dim must be 2 or 4");
}

Eigen::MatrixXcd dirac_beta(int spinor_dim)
{
    if (spinor_dim != 2 && spinor_dim != 4) {
        throw std::domain_error("dirac_beta: spinor_dim must be 2 or 4");
    }
    Eigen::VectorXcd diag = Eigen::VectorXcd::Ones(spinor_dim);
    diag.tail(spinor_dim / 2).setConstant(-1.0);
    return diag.asDiagonal();
}

Eigen::MatrixXcd single_particle_dirac(const LatticeSpec& spec)
{
    spec.validate();
    const int d = spec.spinor_dim;
    const int L = spec.sites;
    const Eigen::MatrixXcd alpha = dirac_alpha(d);
    const Eigen::MatrixXcd beta = dirac_beta(d);

    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(spec.modes(), spec.modes());
    const Complex hop = -kI / (2.0 * spec.spacing);
    for (int l = 0; l < L; ++l) {
        const int right = (l + 1) % L;
        const int left = (l + L - 1) % L;
        // Accumulate: for L <= 2 the two neighbours coincide and cancel.
        h.block(l * d, right * d, d, d) += hop * alpha;
        h.block(l * d, left * d, d, d) -= hop * alpha;
        h.block(l * d, l * d, d, d) += spec.mass * beta;
    }
    return h;
}

SparseMatrixXcd second_quantize(const SectorBasis& sector, const Eigen::MatrixXcd& one_body)
{
    const int m = sector.spec().modes();
    std::vector<Triplet> triplets;
    for (std::size_t col = 0; col < sector.size(); ++col) {
        const Mask s = sector.state(col);
        for (int nu = 0; nu < m; ++nu) {
            const auto removed = apply_annihilator(s, nu);
            if (!removed) {
                continue;
            }
            for (int mu = 0; mu < m; ++mu) {
                const Complex w = one_body(mu, nu);
                if (w == Complex{}) {
                    continue;
                }
                const auto added = apply_creator(removed->state, mu);
                if (!added) {
                    continue;
                }
                const auto row = sector.index_of(added->state);
                if (!row) {
                    throw std::logic_error("second_quantize: operator leaves the sector");
                }
                triplets.emplace_back(static_cast<int>(*row), static_cast<int>(col),
                                      w * static_cast<double>(removed->sign * added->sign));
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(sector.size());
    SparseMatrixXcd op(n, n);
    op.setFromTriplets(triplets.begin(), triplets.end());
    op.prune(Complex{});
    return op;
}

HamiltonianMatrix::HamiltonianMatrix(std::shared_ptr<const SectorBasis> sector, SparseMatrixXcd entries)
    : sector_(std::move(sector)), entries_(std::move(entries)), spectrum_(std::make_shared<Spectrum>())
{
    if (entries_.rows() != entries_.cols()
        || entries_.rows() != static_cast<Eigen::Index>(sector_->size())) {
        throw std::invalid_argument("HamiltonianMatrix: dimension does not match the sector");
    }
    entries_.makeCompressed();
}

bool HamiltonianMatrix::is_hermitian(double tol) const
{
    const SparseMatrixXcd diff = entries_ - SparseMatrixXcd(entries_.adjoint());
    for (int k = 0; k < diff.outerSize(); ++k) {
        for (SparseMatrixXcd::InnerIterator it(diff, k); it; ++it) {
            if (std::abs(it.value()) > tol) {
                return false;
            }
        }
    }
    return true;
}

const HamiltonianMatrix::Spectrum& HamiltonianMatrix::spectrum() const
{
    std::call_once(spectrum_->once, [this] {
        if (!is_hermitian(1e-10)) {
            throw std::logic_error("HamiltonianMatrix: eigendecomposition of a non-Hermitian matrix");
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense());
        if (es.info() != Eigen::Success) {
            throw std::runtime_error("HamiltonianMatrix: eigendecomposition failed");
        }
        spectrum_->values = es.eigenvalues();
        spectrum_->vectors = es.eigenvectors();
    });
    return *spectrum_;
}

const Eigen::VectorXd& HamiltonianMatrix::eigenvalues() const { return spectrum().values; }

const Eigen::MatrixXcd& HamiltonianMatrix::eigenvectors() const { return spectrum().vectors; }

HamiltonianMatrix operator+(const HamiltonianMatrix& a, const HamiltonianMatrix& b)
{
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("HamiltonianMatrix: sum over different sectors");
    }
    SparseMatrixXcd sum = a.entries_ + b.entries_;
    sum.prune(Complex{});
    return HamiltonianMatrix(a.sector_, std::move(sum));
}

HamiltonianMatrix build_free_hamiltonian(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector)
{
    check_sector(spec, *sector);
    SparseMatrixXcd h = second_quantize(*sector, single_particle_dirac(spec));
    return HamiltonianMatrix(std::move(sector), std::move(h));
}

HamiltonianMatrix build_interaction(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector)
{
    check_sector(spec, *sector);
    const auto n = static_cast<Eigen::Index>(sector->size());
    SparseMatrixXcd total(n, n);
    if (spec.coupling == 0.0) {
        return HamiltonianMatrix(std::move(sector), std::move(total));
    }
    const int d = spec.spinor_dim;
    const Eigen::MatrixXcd beta = dirac_beta(d);
    for (int l = 0; l < spec.sites; ++l) {
        // Scalar density psi-bar psi at site l, squared through the operator algebra.
        Eigen::MatrixXcd local = Eigen::MatrixXcd::Zero(spec.modes(), spec.modes());
        local.block(l * d, l * d, d, d) = beta;
        const SparseMatrixXcd scalar_density = second_quantize(*sector, local);
        total += scalar_density * scalar_density;
    }
    const double weight = spec.interaction_scaling == InteractionScaling::Volume
                              ? spec.spacing * spec.spacing * spec.spacing
                              : spec.spacing;
    total *= Complex{spec.coupling * weight, 0.0};
    total.prune(Complex{});
    return HamiltonianMatrix(std::move(sector), std::move(total));
}

HamiltonianMatrix build_hamiltonian(const LatticeSpec& spec, std::shared_ptr<const SectorBasis> sector)
{
    return build_free_hamiltonian(spec, sector) + build_interaction(spec, sector);
}

PilotState evolve(const PilotState& state, const HamiltonianMatrix& h, double dt)
{
    if (state.amplitudes.size() != h.dim()) {
        throw std::invalid_argument("evolve: state and Hamiltonian live on different sectors");
    }
    PilotState out = state;
    out.time = state.time + dt;
    if (dt == 0.0) {
        return out;
    }
    const Eigen::MatrixXcd& v = h.eigenvectors();
    const Eigen::VectorXcd phases =
        (h.eigenvalues().cast<Complex>() * Complex{0.0, -dt}).array().exp().matrix();
    out.amplitudes = v * (phases.asDiagonal() * (v.adjoint() * state.amplitudes));
    return out;
}

double energy(const PilotState& state, const HamiltonianMatrix& h)
{
    return state.amplitudes.dot(h.matrix() * state.amplitudes).real();
}

Eigen::VectorXd marginal_distribution(const PilotState& state)
{
    const SectorBasis& sector = *state.sector;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sector.configuration_count()));
    for (std::size_t i = 0; i < sector.size(); ++i) {
        p(static_cast<Eigen::Index>(sector.configuration_of_state(i))) +=
            std::norm(state.amplitudes(static_cast<Eigen::Index>(i)));
    }
    return p;
}

} // namespace bellsim
