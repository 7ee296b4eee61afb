#include "bellsim/continuum.hpp"
#include "bellsim/presets.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace bellsim;

namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

std::shared_ptr<const ModeBasis> basis(double ell = 10.0, int n_max = 8, double m = 1.0)
{
    return std::make_shared<const ModeBasis>(ell, n_max, m);
}

Positions at(double x) { return Positions::Constant(1, x); }

Positions at(double x1, double x2)
{
    Positions p(2);
    p << x1, x2;
    return p;
}

// Plane wave written out from the field expansion, positive branch.
Eigen::Vector2cd plane_wave(double p, double m, double ell, double t, double x)
{
    const double e = std::sqrt(p * p + m * m);
    const double n = std::sqrt(2.0 * m * (e + m));
    const Eigen::Vector2cd u((e + m) / n, p / n);
    return std::sqrt(m / (e * ell)) * u * std::polar(1.0, p * x - e * t);
}

} // namespace

TEST_CASE("spinor normalization and Dirac equation")
{
    const double m = 1.3;
    for (double p : {-2.0, -0.4, 0.0, 0.7, 3.1}) {
        const double e = std::sqrt(p * p + m * m);
        const Eigen::Vector2d u = dirac_u(p, m);
        const Eigen::Vector2d v = dirac_v(p, m);
        CHECK(u.squaredNorm() == doctest::Approx(e / m));
        CHECK(v.squaredNorm() == doctest::Approx(e / m));
        CHECK(std::abs(dirac_u(p, m).dot(dirac_v(-p, m))) < 1e-14);
        const Eigen::Matrix2d hp = p * oracle::sigma1().real() + m * oracle::sigma3().real();
        const Eigen::Matrix2d hm = -p * oracle::sigma1().real() + m * oracle::sigma3().real();
        CHECK((hp * u - e * u).norm() < 1e-13);
        // v(p) exp(iEt - ipx): momentum -p, energy -E
        CHECK((hm * v + e * v).norm() < 1e-13);
    }
    CHECK(dirac_u<long double>(0.5L, 1.0L).squaredNorm() == doctest::Approx(std::sqrt(1.25)));
}

TEST_CASE("mode basis layout")
{
    const auto b = basis(10.0, 3);
    CHECK(b->size() == 14);
    CHECK(b->momentum(2) == doctest::Approx(2 * kPi * 2 / 10.0));
    for (int k = -3; k <= 3; ++k) {
        const Orbital& pos = b->orbital(b->index(k, Branch::Positive));
        const Orbital& neg = b->orbital(b->index(k, Branch::Negative));
        CHECK(pos.wave_number == k);
        CHECK(pos.kappa == doctest::Approx(b->momentum(k)));
        CHECK(pos.energy == doctest::Approx(b->energy(k)));
        CHECK(neg.kappa == doctest::Approx(-b->momentum(k)));
        CHECK(neg.energy == doctest::Approx(-b->energy(k)));
        CHECK(pos.spinor.norm() == doctest::Approx(1.0));
        CHECK(neg.spinor.norm() == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS((void)b->index(4, Branch::Positive), std::out_of_range);
    CHECK_THROWS_AS(ModeBasis(0.0, 3, 1.0), std::domain_error);
    CHECK_THROWS_AS(ModeBasis(1.0, 3, 0.0), std::domain_error);
}

TEST_CASE("single positive-energy mode")
{
    const double ell = 10.0, m = 1.0;
    const auto b = basis(ell, 8, m);
    const int k = 3;
    const double p = b->momentum(k);
    const double e = b->energy(k);
    const ContinuumState s = single_mode(b, k, Branch::Positive);
    for (double t : {0.0, 0.8}) {
        for (double x : {0.0, 1.3, 7.7}) {
            CHECK((s.one_body_value(t, x) - plane_wave(p, m, ell, t, x)).norm() < 1e-14);
            const FieldSample f = sample_field(s, t, at(x));
            CHECK(f.rho == doctest::Approx(1.0 / ell).epsilon(1e-13));
            CHECK(f.current(0) == doctest::Approx(p / (e * ell)).epsilon(1e-13));
        }
    }
    const Positions v = velocity(s, at(2.0));
    CHECK(v(0) == doctest::Approx(p / e).epsilon(1e-13));
    CHECK(std::abs(v(0)) < 1.0);
    CHECK(evaluate_wavefunction(s, at(1.3)).isApprox(plane_wave(p, m, ell, 0.0, 1.3)));
}

TEST_CASE("negative-energy mode")
{
    const double ell = 10.0, m = 1.0;
    const auto b = basis(ell, 8, m);
    const double p = b->momentum(2), e = b->energy(2);
    const ContinuumState s = single_mode(b, 2, Branch::Negative);
    const double x = 2.2, t = 0.6;
    const Eigen::Vector2cd expect =
        std::sqrt(m / (e * ell)) * dirac_v(p, m).cast<Complex>() * std::polar(1.0, -p * x + e * t);
    CHECK((s.one_body_value(t, x) - expect).norm() < 1e-14);
    CHECK(sample_field(s, t, at(x)).rho == doctest::Approx(1.0 / ell));
}

TEST_CASE("two-mode density against quadrature and explicit synthesis")
{
    const double ell = 10.0, m = 1.0;
    const auto b = basis(ell, 8, m);
    const ContinuumState s = continuum_preset("two-mode(1, 3)", b, 1);
    const double p = b->momentum(1), q = b->momentum(3);
    for (double t : {0.0, 1.7}) {
        for (double x : {0.4, 5.5}) {
            const Eigen::Vector2cd psi = (plane_wave(p, m, ell, t, x) + plane_wave(q, m, ell, t, x)) / std::sqrt(2.0);
            CHECK(density(s.at_time(t), at(x)) == doctest::Approx(psi.squaredNorm()).epsilon(1e-13));
        }
        const double integral =
            oracle::simpson([&](double x) { return density(s.at_time(t), at(x)); }, 0.0, ell, 2000);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-10));
    }
    // Not uniform: the spinor overlap of distinct momenta is nonzero.
    CHECK(std::abs(density(s, at(0.0)) - density(s, at(2.5))) > 1e-4);
}

TEST_CASE("Slater state: norm, antisymmetry, Pauli exclusion")
{
    const double ell = 6.0;
    const auto b = basis(ell, 6, 1.0);
    const ContinuumState s = continuum_preset("slater(1, -2)", b, 2);
    CHECK(s.norm_squared() == doctest::Approx(1.0));
    CHECK(s.is_antisymmetric());
    for (double t : {0.0, 2.3}) {
        const ContinuumState st = s.at_time(t);
        CHECK(st.is_antisymmetric());
        for (const auto& [x1, x2] : {std::pair{0.3, 4.1}, std::pair{2.0, 2.5}}) {
            const Eigen::Matrix2cd a = st.two_body_value(t, x1, x2);
            const Eigen::Matrix2cd bb = st.two_body_value(t, x2, x1);
            CHECK((a + bb.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        }
        const double total = oracle::simpson(
            [&](double x1) {
                return oracle::simpson([&](double x2) { return density(st, at(x1, x2)); }, 0.0, ell, 200);
            },
            0.0, ell, 200);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    }

    const ContinuumState one = single_mode(b, 2, Branch::Positive);
    const ContinuumState zero = ContinuumState::slater(one, one);
    CHECK(zero.norm_squared() < 1e-28);
    CHECK(zero.two_body_value(0.3, 1.0, 2.0).norm() < 1e-15);
    CHECK_THROWS(continuum_preset("slater(2, 2)", b, 2));
}

TEST_CASE("zero-current states")
{
    const auto b = basis(10.0, 8, 1.0);
    const ContinuumState standing = continuum_preset("standing(2)", b, 1);
    for (double x : {0.1, 1.7, 3.3, 9.0}) {
        CHECK(std::abs(current(standing, at(x))(0)) < 1e-15);
    }
    CHECK(continuity_residual(standing, 256) < 1e-12);
    const ContinuumTrajectory tr = integrate_trajectory(standing, at(1.7), 1.0);
    CHECK(tr.positions.back()(0) == 1.7);

    const ContinuumState pair = continuum_preset("slater(0, 1, 0, -1)", b, 2);
    const FieldSample f = sample_field(pair, 0.4, at(1.0, 6.0));
    CHECK(f.current.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(f.rho > 0.0);
    CHECK(nonfactorizability_check(pair, 32).verdict == Factorizability::Indeterminate);
}

TEST_CASE("product state current factorizes")
{
    const auto b = basis(8.0, 10, 1.0);
    const ContinuumState f = gaussian_packet(b, 0.6, 0.5, 3.0);
    const ContinuumState g = gaussian_packet(b, -0.4, 0.7, 5.0);
    const ContinuumState prod = ContinuumState::product(f, g);
    CHECK(prod.norm_squared() == doctest::Approx(1.0));
    for (const auto& [x1, x2] : {std::pair{1.0, 2.0}, std::pair{3.3, 5.1}}) {
        const FieldSample pf = sample_field(prod, 0.2, at(x1, x2));
        const FieldSample a = sample_field(f, 0.2, at(x1));
        const FieldSample c = sample_field(g, 0.2, at(x2));
        CHECK(pf.current(0) == doctest::Approx(a.current(0) * c.rho).epsilon(1e-12));
        CHECK(pf.rho == doctest::Approx(a.rho * c.rho).epsilon(1e-12));
    }
    const FactorizabilityResult r = nonfactorizability_check(prod, 48);
    CHECK(r.ratio < 1e-10);
    CHECK(r.verdict == Factorizability::Factorizable);
}

TEST_CASE("Slater velocity depends on the other position")
{
    const auto b = basis(20.0, 4, 1.0);
    const ContinuumState s = continuum_preset("slater-pair(0, 1, -1, 2)", b, 2).at_time(0.5);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 40; ++i) {
        const double v1 = velocity(s, at(3.0, 0.5 * i))(0);
        lo = std::min(lo, v1);
        hi = std::max(hi, v1);
    }
    CHECK(hi - lo > 1e-3);
    const FactorizabilityResult r = nonfactorizability_check(s, 64);
    CHECK(r.ratio > 1e-3);
    CHECK(r.verdict == Factorizability::NonFactorizable);
    CHECK(r.singular_values(0) >= r.singular_values(1));
}

TEST_CASE("velocity is invariant under phase and scale")
{
    const auto b = basis(10.0, 8, 1.0);
    const ContinuumState s = gaussian_packet(b, 0.5, 0.4, 4.0);
    Eigen::VectorXcd c = s.coefficient_matrix().col(0);
    const ContinuumState scaled = ContinuumState::one_body(b, c * std::polar(3.7, 1.1));
    for (double x : {2.0, 4.5, 6.0}) {
        CHECK(velocity(scaled, at(x))(0) == doctest::Approx(velocity(s, at(x))(0)).epsilon(1e-12));
    }
    CHECK(scaled.normalized().norm_squared() == doctest::Approx(1.0));
}

TEST_CASE("straight-line trajectory of a single mode")
{
    const auto b = basis(10.0, 8, 1.0);
    const ContinuumState s = single_mode(b, 4, Branch::Positive);
    const double v = b->momentum(4) / b->energy(4);
    const double x0 = 9.5;
    const ContinuumTrajectory tr = integrate_trajectory(s, at(x0), 1.0, {.dt = 1e-3});
    CHECK(tr.times.size() == 1001);
    CHECK(tr.times.back() == 1.0);
    const double expect = std::fmod(x0 + v, 10.0);
    CHECK(std::abs(tr.positions.back()(0) - expect) < 1e-10);
    for (const Positions& x : tr.positions) {
        CHECK(x(0) >= 0.0);
        CHECK(x(0) < 10.0);
    }
}

TEST_CASE("backward integration returns to the start")
{
    const auto b = basis(10.0, 12, 1.0);
    const ContinuumState s = gaussian_packet(b, 0.8, 0.5, 5.0);
    const Positions x0 = at(5.3);
    const Positions x1 = advance(s, x0, 0.0, 1.0);
    const Positions back = advance(s, x1, 1.0, 0.0);
    CHECK(std::abs(back(0) - x0(0)) < 1e-6);

    const auto b2 = basis(10.0, 6, 1.0);
    const ContinuumState pair = continuum_preset("slater-packets(1, 0.5, 3.5, -1, 0.5, 6.5)", b2, 2);
    const Positions y0 = at(3.2, 6.1);
    const Positions y1 = advance(pair, y0, 0.0, 1.0);
    const Positions y_back = advance(pair, y1, 1.0, 0.0);
    CHECK((y_back - y0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("node guard aborts")
{
    const auto b = basis(10.0, 8, 1.0);
    const ContinuumState s = single_mode(b, 1, Branch::Positive);
    IntegratorOptions strict;
    strict.node_threshold = 1.0; // above rho = 1/ell everywhere
    CHECK_THROWS_AS((void)integrate_trajectory(s, at(1.0), 1.0, strict), NodeVisitError);
    CHECK_THROWS_AS((void)velocity(s, at(1.0), 1.0), NodeVisitError);
}

TEST_CASE("continuity residuals")
{
    const auto b = basis(10.0, 8, 1.0);
    CHECK(continuity_residual(single_mode(b, 3, Branch::Positive), 64) < 1e-8);
    const ContinuumState two = continuum_preset("two-mode(1, 2)", b, 1);
    const double r256 = continuity_residual(two.at_time(0.3), 256);
    CHECK(r256 < 1e-5);
    CHECK(r256 / continuity_residual(two.at_time(0.3), 512) > 3.5);

    const auto b20 = basis(20.0, 4, 1.0);
    CHECK(continuity_residual(continuum_preset("two-mode(1, 2)", b20, 1).at_time(0.3), 256) < 1e-6);
    const ContinuumState pair = continuum_preset("slater-pair(0, 1, -1, 2)", b20, 2).at_time(0.25);
    const double coarse = continuity_residual(pair, 64);
    const double fine = continuity_residual(pair, 128);
    CHECK(coarse < 1e-5);
    CHECK(coarse / fine > 3.5);
}

TEST_CASE("coarse graining")
{
    const CoarseGrid grid(10.0, 5);
    CHECK(grid.width() == 2.0);
    CHECK(coarse_grain(at(0.0), grid) == Configuration{1, 0, 0, 0, 0});
    CHECK(coarse_grain(at(6.1, 7.9), grid) == Configuration{0, 0, 0, 2, 0});
    CHECK(coarse_grain(at(4.0), grid) == Configuration{0, 0, 1, 0, 0});
    CHECK(coarse_grain(at(9.999999), grid) == Configuration{0, 0, 0, 0, 1});
    CHECK(coarse_grain(at(10.0), grid) == Configuration{1, 0, 0, 0, 0});

    // Boundaries l * lambda computed the way the grid computes them.
    const CoarseGrid odd(1.0, 7);
    for (int l = 0; l < 7; ++l) {
        CHECK(odd.box_of(l * odd.width()) == l);
        CHECK(odd.box_of(std::nextafter(l * odd.width(), -1.0)) == std::max(0, l - 1));
    }
    CHECK_THROWS(CoarseGrid(1.0, 0));
}

TEST_CASE("box probabilities against Simpson quadrature")
{
    const auto b = basis(10.0, 12, 1.0);
    const ContinuumState s = gaussian_packet(b, 0.5, 0.6, 4.0).at_time(0.7);
    const CoarseGrid grid(10.0, 8);
    const Eigen::VectorXd p = box_probabilities(s, grid, 12);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-10));
    for (int l = 0; l < 8; ++l) {
        const double expect = oracle::simpson([&](double x) { return density(s, at(x)); }, l * 1.25, (l + 1) * 1.25, 400);
        CHECK(p(l) == doctest::Approx(expect).epsilon(1e-9));
    }

    const auto b2 = basis(6.0, 4, 1.0);
    const ContinuumState pair = continuum_preset("slater(1, -1)", b2, 2);
    const CoarseGrid g2(6.0, 3);
    const Eigen::VectorXd p2 = box_probabilities(pair, g2);
    CHECK(p2.size() == 9);
    CHECK(p2.sum() == doctest::Approx(1.0).epsilon(1e-10));
    // Antisymmetry makes the ordered-cell table symmetric.
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(p2(i + 3 * j) == doctest::Approx(p2(j + 3 * i)).epsilon(1e-12));
        }
    }
    const auto conf = configuration_probabilities(pair, g2);
    double total = 0.0;
    for (const auto& [n, prob] : conf) {
        CHECK(n.size() == 3);
        total += prob;
    }
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("rejection sampling matches the density")
{
    const auto b = basis(10.0, 12, 1.0);
    const ContinuumState s = gaussian_packet(b, 0.0, 0.5, 5.0);
    const double bound = density_bound(s);
    Rng rng(5);
    const CoarseGrid grid(10.0, 10);
    std::vector<Positions> xs;
    for (int i = 0; i < 20000; ++i) {
        xs.push_back(sample_position(s, bound, rng));
    }
    const Eigen::VectorXd counts = box_histogram(xs, grid, 1);
    const DistributionComparison c = compare_distribution(counts, box_probabilities(s, grid));
    CHECK(c.tv_distance < 0.02);
    CHECK_THROWS_AS((void)sample_position(s, 1e-6, rng), std::logic_error);
}

TEST_CASE("continuum ensemble: determinism and single-mode equivariance")
{
    const auto b = basis(10.0, 8, 1.0);
    const ContinuumState s = single_mode(b, 2, Branch::Positive);
    ContinuumEnsembleOptions options;
    options.size = 400;
    options.checkpoints = {0.5, 1.0};
    options.integrator.dt = 1e-2;
    options.master_seed = 17;
    options.recorded_paths = 3;
    const ContinuumEnsemble a = run_continuum_ensemble(s, options);
    options.threads = 3;
    const ContinuumEnsemble c = run_continuum_ensemble(s, options);
    CHECK(a.aborted() == 0);
    CHECK(a.paths.size() == 3);
    CHECK(a.paths[0].times.front() == 0.0);
    CHECK(a.paths[0].times.back() == 1.0);
    for (std::size_t i = 0; i < options.size; ++i) {
        CHECK(a.initial[i] == c.initial[i]);
        CHECK(a.at_checkpoint[1][i] == c.at_checkpoint[1][i]);
    }
    const double v = b->momentum(2) / b->energy(2);
    CHECK(std::abs(a.at_checkpoint[1][0](0) - std::fmod(a.initial[0](0) + v, 10.0)) < 1e-10);
    const EquivarianceReport r =
        continuum_equivariance_report(s, a, options.checkpoints, CoarseGrid(10.0, 8));
    CHECK(r.pass());
}
