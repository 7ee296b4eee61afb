#include "bellsim/presets.hpp"

#include "bellsim/config.hpp"
#include "bellsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace bellsim {

namespace {

[[noreturn]] void bad(std::string_view text, const std::string& why)
{
    throw ConfigError("preset '" + std::string(text) + "': " + why);
}

void expect_args(std::string_view text, const PresetCall& call, std::initializer_list<std::size_t> counts)
{
    for (std::size_t n : counts) {
        if (call.args.size() == n) {
            return;
        }
    }
    bad(text, "wrong number of arguments");
}

int integer_arg(std::string_view text, double v)
{
    if (v != std::round(v) || std::abs(v) > 1e9) {
        bad(text, "expected an integer argument");
    }
    return static_cast<int>(v);
}

Branch branch_arg(std::string_view text, double v)
{
    if (v == 1.0) {
        return Branch::Positive;
    }
    if (v == -1.0) {
        return Branch::Negative;
    }
    bad(text, "branch must be +1 or -1");
}

void expect_omega(std::string_view text, int omega, int wanted)
{
    if (omega != wanted) {
        bad(text, "needs omega = " + std::to_string(wanted));
    }
}

std::size_t checked_index(std::string_view text, const ModeBasis& basis, int k, Branch b)
{
    if (k < -basis.n_max() || k > basis.n_max()) {
        bad(text, "wave number beyond n_max");
    }
    return basis.index(k, b);
}

ContinuumState two_mode(std::string_view text, const std::shared_ptr<const ModeBasis>& basis, int k1, int k2,
                        double t0)
{
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()));
    c(static_cast<Eigen::Index>(checked_index(text, *basis, k1, Branch::Positive))) += 1.0;
    c(static_cast<Eigen::Index>(checked_index(text, *basis, k2, Branch::Positive))) += 1.0;
    return ContinuumState::one_body(basis, c.normalized(), t0);
}

} // namespace

PresetCall parse_preset(std::string_view text)
{
    PresetCall call;
    const auto open = text.find('(');
    if (open == std::string_view::npos) {
        call.name = std::string(text);
    } else {
        if (text.back() != ')') {
            bad(text, "missing ')'");
        }
        call.name = std::string(text.substr(0, open));
        call.args = parse_real_list(text.substr(open + 1, text.size() - open - 2));
    }
    if (call.name.empty()) {
        bad(text, "empty name");
    }
    return call;
}

PilotState lattice_preset(std::string_view text, std::shared_ptr<const SectorBasis> sector, const HamiltonianMatrix& h,
                          std::uint64_t state_seed, double t0)
{
    const PresetCall call = parse_preset(text);
    const auto dim = static_cast<Eigen::Index>(sector->size());
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
    if (call.name == "vacuum") {
        expect_args(text, call, {0});
        if (sector->omega() != 0) {
            bad(text, "needs omega = 0");
        }
        psi(0) = 1.0;
    } else if (call.name == "random") {
        expect_args(text, call, {0});
        Rng rng(stream_seed(state_seed, 0));
        // Box-Muller on uniform01 keeps the draw identical across standard libraries.
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double r = std::sqrt(-2.0 * std::log1p(-uniform01(rng)));
            const double phi = 2.0 * std::numbers::pi * uniform01(rng);
            psi(i) = std::polar(r, phi);
        }
        psi.normalize();
    } else if (call.name == "basis") {
        expect_args(text, call, {1});
        const int i = integer_arg(text, call.args[0]);
        if (i < 0 || i >= dim) {
            bad(text, "index out of range");
        }
        psi(i) = 1.0;
    } else if (call.name == "eigenstate") {
        expect_args(text, call, {1});
        const int k = integer_arg(text, call.args[0]);
        if (k < 0 || k >= dim) {
            bad(text, "index out of range");
        }
        psi = h.eigenvectors().col(k);
    } else if (call.name == "configuration") {
        Configuration n;
        for (double v : call.args) {
            n.push_back(integer_arg(text, v));
        }
        const auto c = sector->find_configuration(n);
        if (!c) {
            bad(text, "configuration not in this sector");
        }
        const auto members = sector->class_members(*c);
        for (std::size_t i : members) {
            psi(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(static_cast<double>(members.size()));
        }
    } else {
        bad(text, "unknown lattice preset");
    }
    return PilotState{std::move(sector), psi, t0};
}

ContinuumState single_mode(std::shared_ptr<const ModeBasis> basis, int k, Branch branch, double t0)
{
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()));
    c(static_cast<Eigen::Index>(basis->index(k, branch))) = 1.0;
    return ContinuumState::one_body(std::move(basis), c, t0);
}

ContinuumState gaussian_packet(std::shared_ptr<const ModeBasis> basis, double p_mean, double sigma, double x_mean,
                               double t0)
{
    if (!(sigma > 0.0)) {
        throw ConfigError("gaussian packet: sigma must be positive");
    }
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->size()));
    for (int k = -basis->n_max(); k <= basis->n_max(); ++k) {
        const double p = basis->momentum(k);
        const double dp = (p - p_mean) / (2.0 * sigma);
        c(static_cast<Eigen::Index>(basis->index(k, Branch::Positive))) = std::polar(std::exp(-dp * dp), -p * x_mean);
    }
    const double n = c.norm();
    if (!(n > 0.0)) {
        throw ConfigError("gaussian packet: no weight inside the momentum cutoff");
    }
    return ContinuumState::one_body(std::move(basis), c / n, t0);
}

ContinuumState continuum_preset(std::string_view text, std::shared_ptr<const ModeBasis> basis, int omega, double t0)
{
    const PresetCall call = parse_preset(text);
    const auto& a = call.args;
    if (call.name == "single-mode") {
        expect_args(text, call, {1, 2});
        expect_omega(text, omega, 1);
        const int k = integer_arg(text, a[0]);
        const Branch b = a.size() == 2 ? branch_arg(text, a[1]) : Branch::Positive;
        checked_index(text, *basis, k, b);
        return single_mode(basis, k, b, t0);
    }
    if (call.name == "standing") {
        expect_args(text, call, {1});
        expect_omega(text, omega, 1);
        const int k = integer_arg(text, a[0]);
        if (k == 0) {
            bad(text, "needs k != 0");
        }
        return two_mode(text, basis, k, -k, t0);
    }
    if (call.name == "two-mode") {
        expect_args(text, call, {2});
        expect_omega(text, omega, 1);
        const int k1 = integer_arg(text, a[0]);
        const int k2 = integer_arg(text, a[1]);
        if (k1 == k2) {
            bad(text, "needs distinct modes");
        }
        return two_mode(text, basis, k1, k2, t0);
    }
    if (call.name == "gaussian-packet") {
        expect_args(text, call, {2, 3});
        expect_omega(text, omega, 1);
        return gaussian_packet(basis, a[0], a[1], a.size() == 3 ? a[2] : 0.5 * basis->box_length(), t0);
    }
    if (call.name == "slater") {
        expect_args(text, call, {2, 4});
        expect_omega(text, omega, 2);
        const bool branches = a.size() == 4;
        const int k1 = integer_arg(text, a[0]);
        const int k2 = integer_arg(text, branches ? a[2] : a[1]);
        const Branch b1 = branches ? branch_arg(text, a[1]) : Branch::Positive;
        const Branch b2 = branches ? branch_arg(text, a[3]) : Branch::Positive;
        if (checked_index(text, *basis, k1, b1) == checked_index(text, *basis, k2, b2)) {
            bad(text, "identical modes give the zero state");
        }
        return ContinuumState::slater(single_mode(basis, k1, b1, t0), single_mode(basis, k2, b2, t0));
    }
    if (call.name == "slater-pair") {
        expect_args(text, call, {4});
        expect_omega(text, omega, 2);
        int k[4];
        for (int i = 0; i < 4; ++i) {
            k[i] = integer_arg(text, a[static_cast<std::size_t>(i)]);
        }
        if (k[0] == k[1] || k[2] == k[3]) {
            bad(text, "each orbital needs two distinct modes");
        }
        const ContinuumState s = ContinuumState::slater(two_mode(text, basis, k[0], k[1], t0),
                                                        two_mode(text, basis, k[2], k[3], t0));
        if (!(s.norm_squared() > 1e-12)) {
            bad(text, "the two orbitals are parallel");
        }
        return s;
    }
    if (call.name == "slater-packets" || call.name == "product-packets") {
        expect_args(text, call, {6});
        expect_omega(text, omega, 2);
        const ContinuumState f = gaussian_packet(basis, a[0], a[1], a[2], t0);
        const ContinuumState g = gaussian_packet(basis, a[3], a[4], a[5], t0);
        if (call.name == "product-packets") {
            return ContinuumState::product(f, g);
        }
        const ContinuumState s = ContinuumState::slater(f, g);
        if (!(s.norm_squared() > 1e-12)) {
            bad(text, "the two packets coincide");
        }
        return s;
    }
    bad(text, "unknown continuum preset");
}

} // namespace bellsim
