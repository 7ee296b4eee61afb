#include "bellsim/run.hpp"

#include "bellsim/bell_process.hpp"
#include "bellsim/continuum.hpp"
#include "bellsim/dynamics.hpp"
#include "bellsim/presets.hpp"
#include "bellsim/rng.hpp"
#include "bellsim/svg.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bellsim {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string real(double d)
{
    if (std::isnan(d)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

std::string label(const Configuration& n)
{
    std::string s;
    for (int v : n) {
        s += std::to_string(v);
    }
    return s;
}

Json to_json(const Eigen::VectorXd& v)
{
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v(i));
    }
    return a;
}

Json config_json(const RunConfig& c)
{
    Json j;
    j["engine"] = to_string(c.engine);
    j["sites"] = c.lattice.sites;
    j["spinor_dim"] = c.lattice.spinor_dim;
    j["mass"] = c.lattice.mass;
    j["coupling"] = c.lattice.coupling;
    j["spacing"] = c.lattice.spacing;
    j["interaction_scaling"] = to_string(c.lattice.interaction_scaling);
    j["box_length"] = c.box_length;
    j["n_max"] = c.n_max;
    j["omega"] = c.omega;
    j["preset"] = c.preset;
    j["state_seed"] = c.state_seed;
    j["ensemble_size"] = c.ensemble_size;
    j["t0"] = c.t0;
    j["t_max"] = c.t_max;
    j["checkpoints"] = c.checkpoints;
    j["dt"] = c.dt;
    j["dt_floor"] = c.dt_floor;
    j["node_threshold"] = c.node_threshold ? Json(*c.node_threshold) : Json(nullptr);
    j["boxes"] = c.boxes;
    j["tv_tolerance"] = c.tv_tolerance ? Json(*c.tv_tolerance) : Json(nullptr);
    j["recorded_paths"] = c.recorded_paths;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    return j;
}

Json comparison_json(const CheckpointReport& c)
{
    Json j;
    j["time"] = c.time;
    j["tv_distance"] = c.comparison.tv_distance;
    j["band95"] = c.comparison.band95;
    j["threshold"] = c.comparison.threshold;
    j["pass"] = c.comparison.pass;
    j["empirical"] = to_json(c.comparison.empirical);
    j["target"] = to_json(c.comparison.target);
    return j;
}

class Artifacts {
public:
    Artifacts(const fs::path& dir, RunReport& report) : dir_(dir), report_(report) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name)
    {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + (dir_ / name).string());
        }
        report_.artifacts.push_back(name);
        return out;
    }

    void json(const std::string& name, const Json& j) { open(name) << j.dump(2) << '\n'; }

    void svg(const std::string& name, const Plot& plot)
    {
        write_svg(dir_ / name, plot);
        report_.artifacts.push_back(name);
    }

private:
    fs::path dir_;
    RunReport& report_;
};

void add_check(RunReport& r, std::string name, double value, double threshold, bool greater = false)
{
    const bool pass = greater ? value > threshold : value <= threshold;
    r.checks.push_back({std::move(name), value, greater ? ">" : "<=", threshold, pass});
}

// ---------------------------------------------------------------------------
// verify

double master_equation_residual(const PilotState& s, const HamiltonianMatrix& h, double node_threshold)
{
    const Eigen::VectorXd p = marginal_distribution(s);
    const auto nc = p.size();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(nc, nc);
    for (Eigen::Index m = 0; m < nc; ++m) {
        if (p(m) < node_threshold) {
            continue;
        }
        for (const auto& [n, rate] : jump_rates(s, h, static_cast<std::size_t>(m), node_threshold).rates) {
            t(static_cast<Eigen::Index>(n), m) = rate;
        }
    }
    const Eigen::VectorXd flow = t * p - (t.colwise().sum().transpose().array() * p.array()).matrix();
    const double delta = 1e-5;
    const Eigen::VectorXd dp =
        (marginal_distribution(evolve(s, h, delta)) - marginal_distribution(evolve(s, h, -delta))) / (2.0 * delta);
    return (flow - dp).cwiseAbs().maxCoeff();
}

void run_verify(const RunConfig& c, RunReport& r, Artifacts& out)
{
    const LatticeSpec& spec = c.lattice;
    const int modes = spec.modes();

    if (modes <= 8) {
        // Exact integer algebra on the full Fock space.
        using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
        const auto dim = Eigen::Index{1} << modes;
        std::vector<IntMatrix> a, ad;
        for (int mu = 0; mu < modes; ++mu) {
            a.push_back(dense_annihilator<int>(modes, mu));
            ad.push_back(dense_creator<int>(modes, mu));
        }
        int worst = 0;
        for (int mu = 0; mu < modes; ++mu) {
            for (int nu = 0; nu < modes; ++nu) {
                const IntMatrix expect = mu == nu ? IntMatrix(IntMatrix::Identity(dim, dim)) : IntMatrix(IntMatrix::Zero(dim, dim));
                worst = std::max(worst, (a[mu] * ad[nu] + ad[nu] * a[mu] - expect).cwiseAbs().maxCoeff());
                worst = std::max(worst, (a[mu] * a[nu] + a[nu] * a[mu]).cwiseAbs().maxCoeff());
            }
        }
        add_check(r, "anticommutators max deviation", worst, 0.0);

        const auto full = std::make_shared<const SectorBasis>(SectorBasis::full_space(spec));
        const Eigen::MatrixXcd hf = build_hamiltonian(spec, full).dense();
        const Eigen::VectorXd f = fermion_number_diagonal<double>(modes);
        const Eigen::MatrixXcd comm = hf * f.asDiagonal() - f.asDiagonal() * hf;
        add_check(r, "[H, F] max entry", comm.cwiseAbs().maxCoeff(), 1e-12);
    } else {
        r.diagnostics.emplace_back("full Fock space checks skipped: modes", modes);
    }

    const auto sector = std::make_shared<const SectorBasis>(spec, c.omega);
    const HamiltonianMatrix h = build_hamiltonian(spec, sector);
    add_check(r, "H hermiticity max deviation", (h.dense() - h.dense().adjoint()).cwiseAbs().maxCoeff(), 1e-12);

    const PilotState psi = lattice_preset(c.preset, sector, h, c.state_seed, c.t0);
    add_check(r, "initial norm deviation", std::abs(psi.norm() - 1.0), 1e-10);

    // One-quantum correspondence with the first-quantized matrix h.
    {
        const auto one = std::make_shared<const SectorBasis>(spec, 1);
        const HamiltonianMatrix h1 = build_free_hamiltonian(spec, one);
        const Eigen::MatrixXcd h_first = single_particle_dirac(spec);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h_first);
        // In the one-quantum sector, state index i is the mask with the single bit mu = i.
        const PilotState start = lattice_preset("random", one, h1, c.state_seed, 0.0);
        double worst = 0.0;
        for (int k = 1; k <= 8; ++k) {
            const double t = 0.125 * k;
            const Eigen::VectorXcd phases =
                (es.eigenvalues().cast<Complex>() * Complex{0.0, -t}).array().exp().matrix();
            const Eigen::VectorXcd first =
                es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * start.amplitudes;
            worst = std::max(worst, (evolve(start, h1, t).amplitudes - first).cwiseAbs().maxCoeff());
        }
        add_check(r, "one-quantum correspondence max deviation", worst, 1e-8);
    }

    {
        PilotState s = psi;
        for (int i = 0; i < 1000; ++i) {
            s = evolve(s, h, 1e-3);
        }
        add_check(r, "norm drift after 1000 steps", std::abs(s.norm() - psi.norm()), 1e-10);
        const double span = std::max(c.t_max - c.t0, 1e-3);
        const PilotState back = evolve(evolve(psi, h, span), h, -span);
        add_check(r, "reversal max deviation", (back.amplitudes - psi.amplitudes).cwiseAbs().maxCoeff(), 1e-8);
    }

    const double threshold = c.node_threshold.value_or(1e-12);
    std::vector<double> times = c.checkpoints;
    if (times.empty()) {
        times.push_back(c.t_max);
    }
    const double e0 = energy(psi, h);
    double energy_drift = 0.0, antisymmetry = 0.0, master = 0.0, marginal_sum = 0.0;
    double min_rate = 0.0;
    Json per_time = Json::array();
    for (double t : times) {
        const PilotState s = evolve(psi, h, t - c.t0);
        energy_drift = std::max(energy_drift, std::abs(energy(s, h) - e0));
        const Eigen::MatrixXd j = probability_currents(s, h);
        antisymmetry = std::max(antisymmetry, (j + j.transpose()).cwiseAbs().maxCoeff());
        const double residual = master_equation_residual(s, h, threshold);
        master = std::max(master, residual);
        const Eigen::VectorXd p = marginal_distribution(s);
        marginal_sum = std::max(marginal_sum, std::abs(p.sum() - 1.0));
        for (std::size_t m = 0; m < sector->configuration_count(); ++m) {
            if (p(static_cast<Eigen::Index>(m)) >= threshold) {
                for (const auto& entry : jump_rates(s, h, m, threshold).rates) {
                    min_rate = std::min(min_rate, entry.second);
                }
            }
        }
        Json row;
        row["time"] = t;
        row["marginal"] = to_json(p);
        row["master_equation_residual"] = residual;
        per_time.push_back(row);
    }
    add_check(r, "energy drift", energy_drift, 1e-10 * std::max(1.0, std::abs(e0)));
    add_check(r, "marginal normalization deviation", marginal_sum, 1e-10);
    add_check(r, "J antisymmetry max deviation", antisymmetry, 1e-12);
    add_check(r, "negative jump rate magnitude", -min_rate, 0.0);
    add_check(r, "master equation max residual", master, 1e-6);

    Json v;
    Json configs = Json::array();
    for (const Configuration& n : sector->configurations()) {
        configs.push_back(n);
    }
    v["configurations"] = configs;
    v["times"] = per_time;
    out.json("verify.json", v);
}

// ---------------------------------------------------------------------------
// lattice-stochastic

void run_lattice(const RunConfig& c, RunReport& r, Artifacts& out, unsigned threads)
{
    const LatticeSpec& spec = c.lattice;
    const auto sector = std::make_shared<const SectorBasis>(spec, c.omega);
    const HamiltonianMatrix h = build_hamiltonian(spec, sector);
    const PilotState psi = lattice_preset(c.preset, sector, h, c.state_seed, c.t0);
    const PilotEvolution pilot(psi, h, c.t_max, c.dt);

    EnsembleOptions options;
    options.size = c.ensemble_size;
    options.sampler.dt_ctrl = c.dt;
    options.sampler.dt_floor = c.dt_floor;
    options.sampler.node_threshold = c.node_threshold.value_or(1e-12);
    options.master_seed = c.seed;
    options.threads = threads;
    const std::vector<BeableTrajectory> ensemble = sample_ensemble(pilot, options);
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        if (ensemble[i].abort_reason) {
            r.aborts.push_back("trajectory " + std::to_string(i) + ": " + *ensemble[i].abort_reason);
        }
    }
    if (r.aborts.size() == ensemble.size()) {
        return;
    }
    const EquivarianceReport report = equivariance_report(ensemble, pilot, c.checkpoints, c.tv_tolerance);
    for (const CheckpointReport& cp : report.checkpoints) {
        add_check(r, "equivariance TV at t=" + real(cp.time), cp.comparison.tv_distance, cp.comparison.threshold);
    }

    const auto& configs = sector->configurations();
    {
        std::ofstream csv = out.open("trajectories.csv");
        csv << "trajectory,t";
        for (int l = 1; l <= spec.sites; ++l) {
            csv << ",n_" << l;
        }
        csv << ",event\n";
        auto row = [&](std::size_t i, double t, std::size_t cfg, const char* event) {
            csv << i << ',' << real(t);
            for (int v : configs[cfg]) {
                csv << ',' << v;
            }
            csv << ',' << event << '\n';
        };
        for (std::size_t i = 0; i < std::min(c.recorded_paths, ensemble.size()); ++i) {
            const BeableTrajectory& tr = ensemble[i];
            row(i, tr.start_time, tr.initial, "start");
            for (const JumpEvent& e : tr.jumps) {
                row(i, e.time, e.to, "jump");
            }
            row(i, tr.end_time, tr.configurations().back(), tr.abort_reason ? "abort" : "end");
        }
    }
    {
        std::ofstream csv = out.open("distributions.csv");
        csv << "checkpoint,t,configuration,label,empirical,target\n";
        for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
            const CheckpointReport& cp = report.checkpoints[k];
            for (std::size_t n = 0; n < configs.size(); ++n) {
                const auto i = static_cast<Eigen::Index>(n);
                csv << k << ',' << real(cp.time) << ',' << n << ',' << label(configs[n]) << ','
                    << real(cp.comparison.empirical(i)) << ',' << real(cp.comparison.target(i)) << '\n';
            }
        }
    }
    // Occupation fractions on a time grid against the pilot-state marginal.
    const int samples = 100;
    std::vector<double> grid_times;
    std::vector<Eigen::VectorXd> empirical, target;
    {
        std::ofstream csv = out.open("marginals.csv");
        csv << "t,configuration,label,empirical,target\n";
        for (int s = 0; s <= samples; ++s) {
            const double t = c.t0 + (c.t_max - c.t0) * s / samples;
            Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(configs.size()));
            double alive = 0.0;
            for (const BeableTrajectory& tr : ensemble) {
                if (!tr.abort_reason) {
                    counts(static_cast<Eigen::Index>(tr.configuration_at(t))) += 1.0;
                    alive += 1.0;
                }
            }
            grid_times.push_back(t);
            empirical.push_back(counts / alive);
            target.push_back(pilot.marginal_at(t));
            for (std::size_t n = 0; n < configs.size(); ++n) {
                const auto i = static_cast<Eigen::Index>(n);
                csv << real(t) << ',' << n << ',' << label(configs[n]) << ',' << real(empirical.back()(i)) << ','
                    << real(target.back()(i)) << '\n';
            }
        }
    }

    Json j;
    j["rng"] = std::string(kRngAlgorithm);
    j["master_seed"] = c.seed;
    j["ensemble_size"] = report.ensemble_size;
    j["aborted"] = report.aborted;
    Json labels = Json::array();
    for (const Configuration& n : configs) {
        labels.push_back(n);
    }
    j["configurations"] = labels;
    Json cps = Json::array();
    for (const CheckpointReport& cp : report.checkpoints) {
        cps.push_back(comparison_json(cp));
    }
    j["checkpoints"] = cps;
    j["pass"] = report.pass();
    out.json("equivariance.json", j);

    for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
        const CheckpointReport& cp = report.checkpoints[k];
        Plot plot;
        plot.title = "configuration distribution at t = " + real(cp.time);
        plot.x_label = "configuration index";
        plot.y_label = "probability";
        Series e{"empirical", {}, {}, color(0), true};
        Series t{"target", {}, {}, color(1), true};
        for (std::size_t n = 0; n < configs.size(); ++n) {
            e.x.push_back(static_cast<double>(n));
            t.x.push_back(static_cast<double>(n));
            e.y.push_back(cp.comparison.empirical(static_cast<Eigen::Index>(n)));
            t.y.push_back(cp.comparison.target(static_cast<Eigen::Index>(n)));
        }
        plot.series = {e, t};
        out.svg("distribution_" + std::to_string(k) + ".svg", plot);
    }
    Plot plot;
    plot.title = "occupation fractions (dots) against P_n(t) (lines)";
    plot.x_label = "t";
    plot.y_label = "probability";
    for (std::size_t n = 0; n < configs.size(); ++n) {
        Series line{"n = " + label(configs[n]), grid_times, {}, color(n), false};
        Series dots{"", grid_times, {}, color(n), true};
        for (std::size_t s = 0; s < grid_times.size(); ++s) {
            line.y.push_back(target[s](static_cast<Eigen::Index>(n)));
            dots.y.push_back(empirical[s](static_cast<Eigen::Index>(n)));
        }
        plot.series.push_back(line);
        plot.series.push_back(dots);
    }
    plot.legend_limit = 10;
    out.svg("marginals.svg", plot);
}

// ---------------------------------------------------------------------------
// continuum-deterministic

void write_matrix_csv(std::ofstream& csv, const std::vector<double>& xs, const Eigen::MatrixXd& m)
{
    csv << "x1\\x2";
    for (double x : xs) {
        csv << ',' << real(x);
    }
    csv << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        csv << real(xs[static_cast<std::size_t>(i)]);
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            csv << ',' << real(m(i, k));
        }
        csv << '\n';
    }
}

void run_continuum(const RunConfig& c, RunReport& r, Artifacts& out, unsigned threads)
{
    const auto basis = std::make_shared<const ModeBasis>(c.box_length, c.n_max, c.lattice.mass);
    const ContinuumState state = continuum_preset(c.preset, basis, c.omega, c.t0);
    const CoarseGrid grid(c.box_length, c.boxes);
    add_check(r, "norm deviation", std::abs(state.norm_squared() - 1.0), 1e-8);

    const int g = c.omega == 1 ? 256 : 64;
    const double res = continuity_residual(state, g);
    const double res_fine = continuity_residual(state, 2 * g);
    r.diagnostics.emplace_back("continuity residual, grid " + std::to_string(g), res);
    r.diagnostics.emplace_back("continuity residual, grid " + std::to_string(2 * g), res_fine);
    if (c.omega == 2) {
        const FactorizabilityResult f = nonfactorizability_check(state, 64);
        r.diagnostics.emplace_back("j1 singular value ratio (64 x 64)", f.ratio);
    }

    ContinuumEnsembleOptions options;
    options.size = c.ensemble_size;
    options.checkpoints = c.checkpoints;
    options.integrator.dt = c.dt;
    options.integrator.dt_min = c.dt_floor;
    options.integrator.node_threshold = c.node_threshold.value_or(1e-10);
    options.master_seed = c.seed;
    options.threads = threads;
    options.recorded_paths = c.recorded_paths;
    const ContinuumEnsemble ensemble = run_continuum_ensemble(state, options);
    for (std::size_t i = 0; i < ensemble.abort_reason.size(); ++i) {
        if (ensemble.abort_reason[i]) {
            r.aborts.push_back("trajectory " + std::to_string(i) + ": " + *ensemble.abort_reason[i]);
        }
    }
    if (ensemble.aborted() == c.ensemble_size) {
        return;
    }
    const EquivarianceReport report =
        continuum_equivariance_report(state, ensemble, c.checkpoints, grid, c.tv_tolerance);
    for (const CheckpointReport& cp : report.checkpoints) {
        add_check(r, "equivariance TV at t=" + real(cp.time), cp.comparison.tv_distance, cp.comparison.threshold);
    }

    {
        std::ofstream csv = out.open("trajectories.csv");
        csv << "trajectory,t,x1" << (c.omega == 2 ? ",x2" : "") << '\n';
        for (std::size_t i = 0; i < ensemble.paths.size(); ++i) {
            const ContinuumTrajectory& p = ensemble.paths[i];
            for (std::size_t s = 0; s < p.times.size(); ++s) {
                csv << i << ',' << real(p.times[s]);
                for (Eigen::Index a = 0; a < p.positions[s].size(); ++a) {
                    csv << ',' << real(p.positions[s](a));
                }
                csv << '\n';
            }
        }
    }
    {
        std::ofstream csv = out.open("histograms.csv");
        csv << "checkpoint,t,cell,box1" << (c.omega == 2 ? ",box2" : "") << ",count,empirical,target\n";
        for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
            const CheckpointReport& cp = report.checkpoints[k];
            const double alive = static_cast<double>(report.ensemble_size - report.aborted);
            for (Eigen::Index cell = 0; cell < cp.comparison.target.size(); ++cell) {
                csv << k << ',' << real(cp.time) << ',' << cell << ',' << cell % c.boxes;
                if (c.omega == 2) {
                    csv << ',' << cell / c.boxes;
                }
                csv << ',' << std::llround(cp.comparison.empirical(cell) * alive) << ','
                    << real(cp.comparison.empirical(cell)) << ',' << real(cp.comparison.target(cell)) << '\n';
            }
        }
    }
    if (c.omega == 1) {
        std::ofstream csv = out.open("field.csv");
        csv << "x,rho,j\n";
        for (int i = 0; i < g; ++i) {
            const double x = c.box_length * i / g;
            const FieldSample f = sample_field(state, state.time(), Positions::Constant(1, x));
            csv << real(x) << ',' << real(f.rho) << ',' << real(f.current(0)) << '\n';
        }
    } else {
        std::vector<double> xs;
        Eigen::MatrixXd rho(g, g), j1(g, g), j2(g, g);
        for (int i = 0; i < g; ++i) {
            xs.push_back(c.box_length * i / g);
        }
        for (int i = 0; i < g; ++i) {
            for (int k = 0; k < g; ++k) {
                Positions x(2);
                x << xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(k)];
                const FieldSample f = sample_field(state, state.time(), x);
                rho(i, k) = f.rho;
                j1(i, k) = f.current(0);
                j2(i, k) = f.current(1);
            }
        }
        std::ofstream a = out.open("field_rho.csv");
        write_matrix_csv(a, xs, rho);
        std::ofstream b = out.open("field_j1.csv");
        write_matrix_csv(b, xs, j1);
        std::ofstream d = out.open("field_j2.csv");
        write_matrix_csv(d, xs, j2);
    }

    Json j;
    j["rng"] = std::string(kRngAlgorithm);
    j["master_seed"] = c.seed;
    j["ensemble_size"] = report.ensemble_size;
    j["aborted"] = report.aborted;
    j["boxes"] = c.boxes;
    j["cell_index"] = c.omega == 1 ? "box1" : "box1 + boxes * box2";
    Json cps = Json::array();
    for (const CheckpointReport& cp : report.checkpoints) {
        cps.push_back(comparison_json(cp));
    }
    j["checkpoints"] = cps;
    j["pass"] = report.pass();
    out.json("equivariance.json", j);

    for (std::size_t k = 0; k < report.checkpoints.size(); ++k) {
        const CheckpointReport& cp = report.checkpoints[k];
        Plot plot;
        plot.title = "box histogram at t = " + real(cp.time);
        plot.x_label = c.omega == 1 ? "box" : "cell (box1 + boxes * box2)";
        plot.y_label = "probability";
        Series e{"ensemble", {}, {}, color(0), c.omega == 1};
        Series t{"coarse-grained rho", {}, {}, color(1), false};
        for (Eigen::Index cell = 0; cell < cp.comparison.target.size(); ++cell) {
            e.x.push_back(static_cast<double>(cell));
            t.x.push_back(static_cast<double>(cell));
            e.y.push_back(cp.comparison.empirical(cell));
            t.y.push_back(cp.comparison.target(cell));
        }
        plot.series = {e, t};
        out.svg("histogram_" + std::to_string(k) + ".svg", plot);
    }

    Plot fan;
    fan.title = "trajectories";
    fan.x_label = "t";
    fan.y_label = "x";
    for (std::size_t i = 0; i < ensemble.paths.size(); ++i) {
        const ContinuumTrajectory& p = ensemble.paths[i];
        for (int a = 0; a < c.omega; ++a) {
            // Split at periodic wraps so the fan has no horizontal jumps.
            Series s{"", {}, {}, color(static_cast<std::size_t>(a)), false};
            for (std::size_t step = 0; step < p.times.size(); ++step) {
                const double x = p.positions[step](a);
                if (!s.x.empty() && std::abs(x - s.y.back()) > 0.5 * c.box_length) {
                    fan.series.push_back(s);
                    s.x.clear();
                    s.y.clear();
                }
                s.x.push_back(p.times[step]);
                s.y.push_back(x);
            }
            fan.series.push_back(s);
        }
    }
    if (!fan.series.empty()) {
        fan.series.front().label = "x1";
        if (c.omega == 2 && fan.series.size() > 1) {
            for (Series& s : fan.series) {
                if (s.color == color(1)) {
                    s.label = "x2";
                    break;
                }
            }
        }
    }
    out.svg("trajectories.svg", fan);
}

Json report_json(const RunReport& r)
{
    Json j;
    j["config"] = config_json(r.config);
    j["rng"] = std::string(kRngAlgorithm);
    Json checks = Json::array();
    for (const Check& c : r.checks) {
        Json e;
        e["name"] = c.name;
        e["value"] = c.value;
        e["relation"] = c.relation;
        e["threshold"] = c.threshold;
        e["pass"] = c.pass;
        checks.push_back(e);
    }
    j["checks"] = checks;
    Json diag = Json::object();
    for (const auto& [k, v] : r.diagnostics) {
        diag[k] = v;
    }
    j["diagnostics"] = diag;
    j["aborts"] = r.aborts;
    j["artifacts"] = r.artifacts;
    j["exit_code"] = r.exit_code();
    return j;
}

} // namespace

bool RunReport::all_pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

int RunReport::exit_code() const
{
    if (!aborts.empty()) {
        return kExitPhysicsAbort;
    }
    return all_pass() ? kExitPass : kExitCheckFailed;
}

RunReport run(const RunConfig& config, unsigned threads)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.config = config;
    Artifacts out(config.out_dir, report);
    switch (config.engine) {
    case Engine::Verify:
        run_verify(config, report, out);
        break;
    case Engine::LatticeStochastic:
        run_lattice(config, report, out, std::max(1u, threads));
        break;
    case Engine::ContinuumDeterministic:
        run_continuum(config, report, out, std::max(1u, threads));
        break;
    }
    report.artifacts.push_back("report.json");
    {
        std::ofstream json(fs::path(config.out_dir) / "report.json", std::ios::binary);
        json << report_json(report).dump(2) << '\n';
    }
    report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream(fs::path(config.out_dir) / "timing.txt") << "elapsed_seconds " << report.elapsed_seconds
                                                           << "\nthreads " << threads << '\n';
    return report;
}

std::string dump_basis_json(const RunConfig& c)
{
    c.validate();
    const SectorBasis sector(c.lattice, c.omega);
    Json j;
    j["sites"] = c.lattice.sites;
    j["spinor_dim"] = c.lattice.spinor_dim;
    j["omega"] = c.omega;
    j["mode_index"] = "site * spinor_dim + component";
    Json states = Json::array();
    for (std::size_t i = 0; i < sector.size(); ++i) {
        Json s;
        s["index"] = i;
        s["mask"] = sector.state(i);
        s["configuration"] = sector.configuration(sector.configuration_of_state(i));
        states.push_back(s);
    }
    j["states"] = states;
    Json classes = Json::array();
    for (std::size_t k = 0; k < sector.configuration_count(); ++k) {
        Json e;
        e["configuration"] = sector.configuration(k);
        e["members"] = std::vector<std::size_t>(sector.class_members(k).begin(), sector.class_members(k).end());
        classes.push_back(e);
    }
    j["configurations"] = classes;
    return j.dump(2);
}

std::string dump_spectrum_json(const RunConfig& c)
{
    c.validate();
    const auto sector = std::make_shared<const SectorBasis>(c.lattice, c.omega);
    const HamiltonianMatrix h = build_hamiltonian(c.lattice, sector);
    Json j;
    j["omega"] = c.omega;
    j["dimension"] = h.dim();
    j["hermitian"] = h.is_hermitian();
    j["eigenvalues"] = to_json(h.eigenvalues());
    Json entries = Json::array();
    for (Eigen::Index col = 0; col < h.matrix().outerSize(); ++col) {
        for (SparseMatrixXcd::InnerIterator it(h.matrix(), col); it; ++it) {
            entries.push_back({it.row(), it.col(), it.value().real(), it.value().imag()});
        }
    }
    j["entries (row, col, re, im)"] = entries;
    return j.dump(2);
}

} // namespace bellsim
