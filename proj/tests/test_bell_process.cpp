#include "bellsim/bell_process.hpp"
#include "bellsim/presets.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace bellsim;

namespace {

LatticeSpec spec(int sites, double coupling = 0.0)
{
    LatticeSpec s;
    s.sites = sites;
    s.spinor_dim = 2;
    s.coupling = coupling;
    return s;
}

struct System {
    std::shared_ptr<const SectorBasis> sector;
    HamiltonianMatrix h;
};

System system(int sites, int omega, double coupling = 0.5)
{
    const LatticeSpec s = spec(sites, coupling);
    auto b = std::make_shared<const SectorBasis>(s, omega);
    return {b, build_hamiltonian(s, b)};
}

// Central difference of the marginals, step delta.
Eigen::VectorXd marginal_rate(const PilotState& psi, const HamiltonianMatrix& h, double delta = 1e-5)
{
    return (marginal_distribution(evolve(psi, h, delta)) - marginal_distribution(evolve(psi, h, -delta)))
           / (2.0 * delta);
}

// Two configurations A = (1, 0), B = (0, 1) coupled through one real matrix element.
struct Rabi {
    std::shared_ptr<const SectorBasis> sector;
    HamiltonianMatrix h;
    std::size_t a;
    std::size_t b;
};

Rabi rabi(double omega)
{
    const LatticeSpec s = spec(2);
    auto b = std::make_shared<const SectorBasis>(s, 1);
    SparseMatrixXcd m(4, 4);
    // state 0: mask 0b0001 (site 0), state 2: mask 0b0100 (site 1)
    m.insert(0, 2) = omega;
    m.insert(2, 0) = omega;
    m.makeCompressed();
    const std::size_t ca = b->configuration_of_state(0);
    const std::size_t cb = b->configuration_of_state(2);
    return {b, HamiltonianMatrix(b, m), ca, cb};
}

} // namespace

TEST_CASE("currents are antisymmetric and their row sums give dP/dt")
{
    for (const auto& [sites, omega] : {std::pair{2, 1}, std::pair{3, 1}, std::pair{3, 2}, std::pair{4, 2}}) {
        const System sys = system(sites, omega);
        const PilotState psi = lattice_preset("random", sys.sector, sys.h, 100 + sites + omega);
        for (double t : {0.0, 0.37, 1.9}) {
            const PilotState s = evolve(psi, sys.h, t);
            const Eigen::MatrixXd j = probability_currents(s, sys.h);
            CHECK((j + j.transpose()).cwiseAbs().maxCoeff() < 1e-12);
            const Eigen::VectorXd dp = marginal_rate(s, sys.h);
            CHECK((j.rowwise().sum() - dp).cwiseAbs().maxCoeff() < 1e-8);
            // Column sums carry the opposite sign: outflow of configuration m.
            CHECK((j.colwise().sum().transpose() + dp).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("master equation with clipped rates")
{
    for (int omega : {1, 2}) {
        const System sys = system(3, omega);
        const PilotState psi = lattice_preset("random", sys.sector, sys.h, 40 + omega);
        for (double t : {0.1, 0.8, 2.3}) {
            const PilotState s = evolve(psi, sys.h, t);
            const Eigen::VectorXd p = marginal_distribution(s);
            const auto nc = p.size();
            Eigen::MatrixXd rate = Eigen::MatrixXd::Zero(nc, nc);
            for (Eigen::Index m = 0; m < nc; ++m) {
                const JumpRateTable table = jump_rates(s, sys.h, static_cast<std::size_t>(m));
                CHECK(table.source_weight == doctest::Approx(p(m)));
                for (const auto& [n, r] : table.rates) {
                    CHECK(r >= 0.0);
                    CHECK(n != static_cast<std::size_t>(m));
                    rate(static_cast<Eigen::Index>(n), m) = r;
                }
            }
            Eigen::VectorXd flow(nc);
            for (Eigen::Index n = 0; n < nc; ++n) {
                double f = 0.0;
                for (Eigen::Index m = 0; m < nc; ++m) {
                    f += rate(n, m) * p(m) - rate(m, n) * p(n);
                }
                flow(n) = f;
            }
            CHECK((flow - marginal_rate(s, sys.h)).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("rates only connect configurations linked by H")
{
    const System sys = system(4, 2);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 5);
    for (std::size_t m = 0; m < sys.sector->configuration_count(); ++m) {
        for (const auto& [n, r] : jump_rates(psi, sys.h, m).rates) {
            bool linked = false;
            for (std::size_t col : sys.sector->class_members(m)) {
                for (SparseMatrixXcd::InnerIterator it(sys.h.matrix(), static_cast<Eigen::Index>(col)); it; ++it) {
                    linked |= sys.sector->configuration_of_state(static_cast<std::size_t>(it.row())) == n;
                }
            }
            CHECK(linked);
            CHECK(r > 0.0);
        }
    }
}

TEST_CASE("stationary state has constant currents with zero net flow")
{
    const System sys = system(3, 2);
    const PilotState psi = lattice_preset("eigenstate(4)", sys.sector, sys.h, 1);
    const Eigen::MatrixXd j0 = probability_currents(psi, sys.h);
    const Eigen::MatrixXd j1 = probability_currents(evolve(psi, sys.h, 1.3), sys.h);
    CHECK((j0 - j1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(j0.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(marginal_rate(psi, sys.h).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mass-only lattice freezes the beable")
{
    const System sys = system(1, 1, 0.0);
    const PilotState psi{sys.sector, Eigen::Vector2cd(0.6, 0.8), 0.0};
    CHECK(jump_rates(psi, sys.h, 0).rates.empty());
    const BeableTrajectory tr = sample_trajectory(psi, 0, sys.h, 2.0, 1e-2, 77);
    CHECK(tr.jumps.empty());
    CHECK(tr.configuration_at(1.5) == 0);
    CHECK(tr.end_time == doctest::Approx(2.0));
}

TEST_CASE("node visits raise")
{
    const System sys = system(3, 1);
    PilotState psi{sys.sector, Eigen::VectorXcd::Zero(6), 0.0};
    psi.amplitudes(0) = 1.0;
    const std::size_t empty = sys.sector->configuration_of_state(5);
    CHECK_THROWS_AS((void)jump_rates(psi, sys.h, empty), NodeVisitError);
    const PilotEvolution pilot(psi, sys.h, 0.1, 1e-3);
    CHECK_THROWS_AS((void)sample_trajectory(pilot, empty, SamplerOptions{}, std::uint64_t{3}), NodeVisitError);
}

TEST_CASE("step floor aborts with a diagnostic")
{
    const System sys = system(3, 1);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 8);
    const PilotEvolution pilot(psi, sys.h, 0.5, 0.1);
    SamplerOptions options;
    options.dt_ctrl = 0.1;
    options.dt_floor = 0.09;
    options.max_jump_probability = 1e-6;
    CHECK_THROWS_AS((void)sample_trajectory(pilot, 0, options, std::uint64_t{1}), StepFloorError);

    EnsembleOptions e;
    e.size = 4;
    e.sampler = options;
    const auto ensemble = sample_ensemble(pilot, e);
    for (const BeableTrajectory& tr : ensemble) {
        REQUIRE(tr.abort_reason);
        CHECK(tr.abort_reason->find("step floor") != std::string::npos);
    }
}

TEST_CASE("first-jump survival follows the pilot weight of the start configuration")
{
    // H couples A and B with strength w; from A the hazard is 2 w tan(w t) and
    // the survival probability is cos^2(w t) = D_A(t), with no return jumps
    // before t = pi / (2 w).
    const double w = 1.0;
    const Rabi sys = rabi(w);
    PilotState psi{sys.sector, Eigen::VectorXcd::Zero(4), 0.0};
    psi.amplitudes(0) = 1.0;
    const double t_max = 1.2;
    const PilotEvolution pilot(psi, sys.h, t_max, 1e-3);

    EnsembleOptions options;
    options.size = 10000;
    options.master_seed = 2024;
    const auto ensemble = sample_ensemble(pilot, options);
    double sum = 0.0, sum2 = 0.0;
    for (const BeableTrajectory& tr : ensemble) {
        REQUIRE_FALSE(tr.abort_reason);
        CHECK(tr.initial == sys.a);
        CHECK(tr.jumps.size() <= 1);
        const double tau = tr.jumps.empty() ? t_max : tr.jumps.front().time;
        sum += tau;
        sum2 += tau * tau;
    }
    const double n = static_cast<double>(ensemble.size());
    const double mean = sum / n;
    const double sd = std::sqrt((sum2 / n - mean * mean) / n);
    // E[min(tau, T)] = int_0^T cos^2(w t) dt
    const double expect = 0.5 * t_max + std::sin(2.0 * w * t_max) / (4.0 * w);
    CHECK(std::abs(mean - expect) < 3.0 * sd + 1e-3);

    // Survival at intermediate times.
    for (double t : {0.3, 0.6, 0.9}) {
        double stay = 0.0;
        for (const BeableTrajectory& tr : ensemble) {
            stay += tr.configuration_at(t) == sys.a ? 1.0 : 0.0;
        }
        const double p = std::pow(std::cos(w * t), 2);
        CHECK(std::abs(stay / n - p) < 3.0 * std::sqrt(p * (1 - p) / n) + 1e-3);
    }
}

TEST_CASE("ensemble equivariance on three sites")
{
    const System sys = system(3, 1);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 21);
    const PilotEvolution pilot(psi, sys.h, 1.0, 1e-3);
    EnsembleOptions options;
    options.size = 4000;
    options.master_seed = 99;
    const auto ensemble = sample_ensemble(pilot, options);
    const std::vector<double> checkpoints{0.0, 0.5, 1.0};
    const EquivarianceReport report = equivariance_report(ensemble, pilot, checkpoints, 0.03);
    CHECK(report.aborted == 0);
    for (const CheckpointReport& c : report.checkpoints) {
        CHECK(c.comparison.tv_distance <= 0.03);
        CHECK(c.comparison.band95 > 0.0);
    }
    CHECK(report.pass());
    // Fermion number is conserved along every path.
    for (const BeableTrajectory& tr : ensemble) {
        for (std::size_t c : tr.configurations()) {
            int total = 0;
            for (int v : sys.sector->configuration(c)) {
                total += v;
            }
            CHECK(total == 1);
        }
        for (std::size_t k = 1; k < tr.jumps.size(); ++k) {
            CHECK(tr.jumps[k].time >= tr.jumps[k - 1].time);
            CHECK(tr.jumps[k].from == tr.jumps[k - 1].to);
        }
    }
}

TEST_CASE("equivariance report on designed ensembles")
{
    const System sys = system(3, 1);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 21);
    const Eigen::VectorXd p0 = marginal_distribution(psi);
    std::vector<BeableTrajectory> frozen(500);
    for (BeableTrajectory& tr : frozen) {
        tr.initial = 1;
    }
    const std::vector<double> checkpoints{0.0};
    const auto indicator = [&](double) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(p0.size());
        p(1) = 1.0;
        return p;
    };
    const EquivarianceReport same = equivariance_report(frozen, indicator, checkpoints);
    CHECK(same.checkpoints[0].comparison.tv_distance == 0.0);
    CHECK(same.pass());

    const EquivarianceReport wrong = equivariance_report(frozen, [&](double) { return p0; }, checkpoints);
    CHECK(wrong.checkpoints[0].comparison.tv_distance == doctest::Approx(1.0 - p0(1)));
    CHECK_FALSE(wrong.pass());

    CHECK_THROWS_AS(equivariance_report(std::vector<BeableTrajectory>{}, indicator, checkpoints),
                    std::invalid_argument);
}

TEST_CASE("aborted members fail the report")
{
    std::vector<BeableTrajectory> ensemble(10);
    ensemble[3].abort_reason = "node visit";
    const std::vector<double> checkpoints{0.0};
    const EquivarianceReport r =
        equivariance_report(ensemble, [](double) { return Eigen::VectorXd::Unit(2, 0); }, checkpoints);
    CHECK(r.aborted == 1);
    CHECK(r.checkpoints[0].comparison.tv_distance == 0.0);
    CHECK_FALSE(r.pass());
}

TEST_CASE("seeded determinism and thread independence")
{
    const System sys = system(3, 2);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 3);
    const PilotEvolution pilot(psi, sys.h, 1.0, 1e-3);
    const BeableTrajectory a = sample_trajectory(pilot, 2, SamplerOptions{}, std::uint64_t{42});
    const BeableTrajectory b = sample_trajectory(pilot, 2, SamplerOptions{}, std::uint64_t{42});
    REQUIRE(a.jumps.size() == b.jumps.size());
    for (std::size_t k = 0; k < a.jumps.size(); ++k) {
        CHECK(a.jumps[k].time == b.jumps[k].time);
        CHECK(a.jumps[k].to == b.jumps[k].to);
    }

    EnsembleOptions one;
    one.size = 300;
    one.master_seed = 7;
    EnsembleOptions three = one;
    three.threads = 3;
    const auto e1 = sample_ensemble(pilot, one);
    const auto e3 = sample_ensemble(pilot, three);
    for (std::size_t i = 0; i < e1.size(); ++i) {
        CHECK(e1[i].rng_seed == e3[i].rng_seed);
        CHECK(e1[i].initial == e3[i].initial);
        REQUIRE(e1[i].jumps.size() == e3[i].jumps.size());
        for (std::size_t k = 0; k < e1[i].jumps.size(); ++k) {
            CHECK(e1[i].jumps[k].time == e3[i].jumps[k].time);
            CHECK(e1[i].jumps[k].to == e3[i].jumps[k].to);
        }
    }
}

TEST_CASE("pilot evolution grid and rates")
{
    const System sys = system(3, 1);
    const PilotState psi = lattice_preset("random", sys.sector, sys.h, 13);
    const PilotEvolution pilot(psi, sys.h, 0.25, 0.1);
    CHECK(pilot.grid_size() == 4);
    CHECK(pilot.grid_time(3) == doctest::Approx(0.25));
    const PilotState direct = evolve(psi, sys.h, 0.2);
    CHECK((pilot.state_at(0.2).amplitudes - direct.amplitudes).norm() < 1e-12);
    const JumpRateTable grid = pilot.rates_on_grid(2, 0, 1e-12);
    const JumpRateTable fresh = jump_rates(direct, sys.h, 0);
    REQUIRE(grid.rates.size() == fresh.rates.size());
    for (std::size_t k = 0; k < grid.rates.size(); ++k) {
        CHECK(grid.rates[k].first == fresh.rates[k].first);
        CHECK(grid.rates[k].second == doctest::Approx(fresh.rates[k].second).epsilon(1e-10));
    }
    CHECK_THROWS_AS(PilotEvolution(psi, sys.h, -1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(PilotEvolution(psi, sys.h, 1.0, 0.0), std::invalid_argument);
}
