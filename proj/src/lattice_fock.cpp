#include "bellsim/lattice_fock.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace bellsim {

namespace {

constexpr int kTable = kMaxModes + 1;

constexpr std::array<std::array<std::uint64_t, kTable>, kTable> make_binomials()
{
    std::array<std::array<std::uint64_t, kTable>, kTable> c{};
    for (int n = 0; n < kTable; ++n) {
        c[n][0] = 1;
        for (int k = 1; k <= n; ++k) {
            c[n][k] = c[n - 1][k - 1] + (k < n ? c[n - 1][k] : 0);
        }
    }
    return c;
}

constexpr auto kBinomials = make_binomials();

// Rank of a fixed-popcount mask in increasing numeric order.
std::size_t colex_rank(Mask state)
{
    std::size_t rank = 0;
    int i = 1;
    while (state != 0) {
        const int bit = std::countr_zero(state);
        rank += kBinomials[bit][i];
        state &= state - 1u;
        ++i;
    }
    return rank;
}

} // namespace

void LatticeSpec::validate() const
{
    if (sites < 1) {
        throw std::domain_error("lattice: sites must be >= 1");
    }
    if (spinor_dim != 2 && spinor_dim != 4) {
        throw std::domain_error("lattice: spinor_dim must be 2 or 4");
    }
    if (!(mass > 0.0)) {
        throw std::domain_error("lattice: mass must be positive");
    }
    if (!(spacing > 0.0)) {
        throw std::domain_error("lattice: spacing must be positive");
    }
    if (modes() > kMaxModes) {
        throw std::domain_error("lattice: L*d = " + std::to_string(modes()) + " exceeds the cap of "
                                + std::to_string(kMaxModes) + " modes");
    }
}

std::uint64_t binomial(int n, int k)
{
    if (n < 0 || k < 0 || k > n || n >= kTable) {
        return 0;
    }
    return kBinomials[n][k];
}

std::optional<SignedState> apply_creator(Mask state, int mode)
{
    const Mask bit = Mask{1} << mode;
    if (state & bit) {
        return std::nullopt;
    }
    return SignedState{state | bit, jordan_wigner_sign(state, mode)};
}

std::optional<SignedState> apply_annihilator(Mask state, int mode)
{
    const Mask bit = Mask{1} << mode;
    if (!(state & bit)) {
        return std::nullopt;
    }
    return SignedState{state & ~bit, jordan_wigner_sign(state, mode)};
}

Configuration configuration_of(Mask state, const LatticeSpec& spec)
{
    Configuration n(static_cast<std::size_t>(spec.sites), 0);
    const Mask block = (Mask{1} << spec.spinor_dim) - 1u;
    for (int l = 0; l < spec.sites; ++l) {
        n[static_cast<std::size_t>(l)] = std::popcount((state >> (l * spec.spinor_dim)) & block);
    }
    return n;
}

SectorBasis::SectorBasis(const LatticeSpec& spec, int omega)
    : spec_(spec), omega_(omega)
{
    spec_.validate();
    const int m = spec_.modes();
    if (omega < 0 || omega > m) {
        throw std::domain_error("sector: omega = " + std::to_string(omega) + " outside [0, "
                                + std::to_string(m) + "]");
    }
    states_.reserve(binomial(m, omega));
    if (omega == 0) {
        states_.push_back(0);
    } else {
        // Gosper's hack walks fixed-popcount masks in increasing order.
        Mask s = (Mask{1} << omega) - 1u;
        const Mask limit = Mask{1} << m;
        while (s < limit) {
            states_.push_back(s);
            const Mask c = s & (~s + 1u);
            const Mask r = s + c;
            s = (((r ^ s) >> 2) / c) | r;
        }
    }
    group_by_configuration();
}

SectorBasis::SectorBasis(const LatticeSpec& spec, std::optional<int> omega, std::vector<Mask> states)
    : spec_(spec), omega_(omega), states_(std::move(states))
{
    group_by_configuration();
}

SectorBasis SectorBasis::full_space(const LatticeSpec& spec)
{
    spec.validate();
    std::vector<Mask> states(std::size_t{1} << spec.modes());
    for (std::size_t i = 0; i < states.size(); ++i) {
        states[i] = static_cast<Mask>(i);
    }
    return SectorBasis(spec, std::nullopt, std::move(states));
}

void SectorBasis::group_by_configuration()
{
    for (Mask s : states_) {
        configuration_lookup_.emplace(configuration_of(s, spec_), 0);
    }
    configurations_.reserve(configuration_lookup_.size());
    for (auto& [n, idx] : configuration_lookup_) {
        idx = configurations_.size();
        configurations_.push_back(n);
    }
    members_.assign(configurations_.size(), {});
    state_class_.resize(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const std::size_t c = configuration_lookup_.at(configuration_of(states_[i], spec_));
        state_class_[i] = c;
        members_[c].push_back(i);
    }
}

std::optional<std::size_t> SectorBasis::index_of(Mask state) const
{
    if (state >> spec_.modes()) {
        return std::nullopt;
    }
    if (!omega_) {
        return static_cast<std::size_t>(state);
    }
    if (std::popcount(state) != *omega_) {
        return std::nullopt;
    }
    return colex_rank(state);
}

std::optional<std::size_t> SectorBasis::find_configuration(const Configuration& n) const
{
    auto it = configuration_lookup_.find(n);
    if (it == configuration_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

} // namespace bellsim
