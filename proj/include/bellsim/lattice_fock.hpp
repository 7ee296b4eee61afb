#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace bellsim {

/// Occupation bitmask over the M = L*d lattice modes.
using Mask = std::uint32_t;

/// Per-site fermion counts n = (n_1, ..., n_L).
using Configuration = std::vector<int>;

inline constexpr int kMaxModes = 24;

/// Weighting of the site-local quartic term: lambda (1D segment) or lambda^3 (cubic box).
enum class InteractionScaling { Spacing, Volume };

struct LatticeSpec {
    int sites = 1;
    int spinor_dim = 2;
    double mass = 1.0;
    double coupling = 0.0;
    double spacing = 1.0;
    InteractionScaling interaction_scaling = InteractionScaling::Spacing;

    [[nodiscard]] int modes() const { return sites * spinor_dim; }

    /// Site-major, spinor-minor: mu = site * d + component (both 0-based).
    [[nodiscard]] int mode_index(int site, int component) const { return site * spinor_dim + component; }
    [[nodiscard]] int site_of(int mode) const { return mode / spinor_dim; }
    [[nodiscard]] int component_of(int mode) const { return mode % spinor_dim; }

    /// Throws std::domain_error when a field is out of range.
    void validate() const;

    bool operator==(const LatticeSpec&) const = default;
};

struct SignedState {
    Mask state;
    int sign;

    bool operator==(const SignedState&) const = default;
};

/// Jordan-Wigner sign: (-1)^(number of occupied modes with index below `mode`).
[[nodiscard]] inline int jordan_wigner_sign(Mask state, int mode)
{
    const Mask below = state & ((Mask{1} << mode) - 1u);
    return (std::popcount(below) & 1) ? -1 : 1;
}

/// psi^dagger_mode |state>. Empty when the mode is already occupied.
[[nodiscard]] std::optional<SignedState> apply_creator(Mask state, int mode);

/// psi_mode |state>. Empty when the mode is unoccupied.
[[nodiscard]] std::optional<SignedState> apply_annihilator(Mask state, int mode);

[[nodiscard]] Configuration configuration_of(Mask state, const LatticeSpec& spec);

[[nodiscard]] std::uint64_t binomial(int n, int k);

/// Basis of one fermion-number sector, or of the whole Fock space.
///
/// States are kept in increasing bitmask order (colexicographic for fixed
/// popcount). They are grouped by density configuration; within a
/// configuration the members differ only in the spinor components that are
/// occupied on each site, which plays the role of the completing label q.
class SectorBasis {
public:
    /// All binomial(M, omega) states with popcount omega.
    SectorBasis(const LatticeSpec& spec, int omega);

    /// The full 2^M Fock space, every sector at once.
    static SectorBasis full_space(const LatticeSpec& spec);

    [[nodiscard]] const LatticeSpec& spec() const { return spec_; }

    /// Empty for the full Fock space.
    [[nodiscard]] std::optional<int> omega() const { return omega_; }

    [[nodiscard]] std::size_t size() const { return states_.size(); }
    [[nodiscard]] Mask state(std::size_t i) const { return states_[i]; }
    [[nodiscard]] std::span<const Mask> states() const { return states_; }
    [[nodiscard]] std::optional<std::size_t> index_of(Mask state) const;

    [[nodiscard]] std::size_t configuration_count() const { return configurations_.size(); }
    [[nodiscard]] const Configuration& configuration(std::size_t c) const { return configurations_[c]; }
    [[nodiscard]] std::span<const Configuration> configurations() const { return configurations_; }
    [[nodiscard]] std::size_t configuration_of_state(std::size_t i) const { return state_class_[i]; }
    [[nodiscard]] std::span<const std::size_t> class_members(std::size_t c) const { return members_[c]; }
    [[nodiscard]] std::optional<std::size_t> find_configuration(const Configuration& n) const;

private:
    SectorBasis(const LatticeSpec& spec, std::optional<int> omega, std::vector<Mask> states);
    void group_by_configuration();

    LatticeSpec spec_;
    std::optional<int> omega_;
    std::vector<Mask> states_;
    std::vector<Configuration> configurations_;
    std::vector<std::size_t> state_class_;
    std::vector<std::vector<std::size_t>> members_;
    std::map<Configuration, std::size_t> configuration_lookup_;
};

[[nodiscard]] inline SectorBasis enumerate_sector(const LatticeSpec& spec, int omega)
{
    return SectorBasis(spec, omega);
}

/// Dense matrix of psi_mode on the full 2^M Fock space, assembled from
/// apply_annihilator. Scalar may be an integer type for exact algebra.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense_annihilator(int modes, int mode)
{
    const Eigen::Index dim = Eigen::Index{1} << modes;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> op =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col) {
        if (auto out = apply_annihilator(static_cast<Mask>(col), mode)) {
            op(static_cast<Eigen::Index>(out->state), col) = static_cast<Scalar>(out->sign);
        }
    }
    return op;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense_creator(int modes, int mode)
{
    const Eigen::Index dim = Eigen::Index{1} << modes;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> op =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col) {
        if (auto out = apply_creator(static_cast<Mask>(col), mode)) {
            op(static_cast<Eigen::Index>(out->state), col) = static_cast<Scalar>(out->sign);
        }
    }
    return op;
}

/// Total fermion number F as a diagonal over the full Fock space.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> fermion_number_diagonal(int modes)
{
    const Eigen::Index dim = Eigen::Index{1} << modes;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> f(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        f(i) = static_cast<Scalar>(std::popcount(static_cast<Mask>(i)));
    }
    return f;
}

} // namespace bellsim
