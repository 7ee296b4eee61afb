#include "bellsim/bell_process.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace bellsim {

namespace {

// 2 Re[conj(a) (-i v) b]
inline double current_term(Complex a, Complex v, Complex b)
{
    const Complex minus_i_v{v.imag(), -v.real()};
    return 2.0 * (std::conj(a) * minus_i_v * b).real();
}

// Column m of the current matrix: J(n, m) for all n.
Eigen::VectorXd current_column(const Eigen::VectorXcd& psi, const HamiltonianMatrix& h, std::size_t m)
{
    const SectorBasis& sector = h.sector();
    const SparseMatrixXcd& mat = h.matrix();
    Eigen::VectorXd column = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sector.configuration_count()));
    for (std::size_t c : sector.class_members(m)) {
        const auto col = static_cast<Eigen::Index>(c);
        for (SparseMatrixXcd::InnerIterator it(mat, col); it; ++it) {
            const std::size_t n = sector.configuration_of_state(static_cast<std::size_t>(it.row()));
            column(static_cast<Eigen::Index>(n)) += current_term(psi(it.row()), it.value(), psi(col));
        }
    }
    return column;
}

JumpRateTable rates_from_column(double t, std::size_t m, double d_m, const Eigen::VectorXd& column,
                                double node_threshold)
{
    if (d_m < node_threshold) {
        std::ostringstream msg;
        msg << "node visit: D_m = " << d_m << " < " << node_threshold << " at t = " << t << " in configuration "
            << m;
        throw NodeVisitError(msg.str());
    }
    JumpRateTable table;
    table.time = t;
    table.source = m;
    table.source_weight = d_m;
    for (Eigen::Index n = 0; n < column.size(); ++n) {
        if (static_cast<std::size_t>(n) != m && column(n) > 0.0) {
            table.rates.emplace_back(static_cast<std::size_t>(n), column(n) / d_m);
        }
    }
    return table;
}

double class_weight(const Eigen::VectorXcd& psi, const SectorBasis& sector, std::size_t m)
{
    double d = 0.0;
    for (std::size_t i : sector.class_members(m)) {
        d += std::norm(psi(static_cast<Eigen::Index>(i)));
    }
    return d;
}

void run_path(const PilotEvolution& pilot, const SamplerOptions& options, Rng& rng, BeableTrajectory& traj)
{
    std::size_t current = traj.initial;
    traj.start_time = pilot.start_time();
    traj.end_time = pilot.start_time();
    for (std::size_t k = 0; k + 1 < pilot.grid_size(); ++k) {
        const double ta = pilot.grid_time(k);
        const double tb = pilot.grid_time(k + 1);
        double t = ta;
        while (t < tb) {
            const JumpRateTable table = (t == ta) ? pilot.rates_on_grid(k, current, options.node_threshold)
                                                  : pilot.rates_at(t, current, options.node_threshold);
            const double exit = table.exit_rate();
            double h = tb - t;
            bool full = true;
            while (exit * h > options.max_jump_probability) {
                h *= 0.5;
                full = false;
                if (h < options.dt_floor) {
                    std::ostringstream msg;
                    msg << "step floor: exit rate " << exit << " at t = " << t << " needs dt below "
                        << options.dt_floor;
                    throw StepFloorError(msg.str());
                }
            }
            const double t_next = full ? tb : t + h;
            if (exit > 0.0) {
                const double u = uniform01(rng);
                double acc = 0.0;
                for (const auto& [n, rate] : table.rates) {
                    acc += rate * h;
                    if (u < acc) {
                        traj.jumps.push_back({t_next, current, n});
                        current = n;
                        break;
                    }
                }
            }
            t = t_next;
            traj.end_time = t;
        }
    }
}

} // namespace

Eigen::MatrixXd probability_currents(const PilotState& state, const HamiltonianMatrix& h)
{
    const SectorBasis& sector = h.sector();
    const auto nc = static_cast<Eigen::Index>(sector.configuration_count());
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nc, nc);
    const SparseMatrixXcd& mat = h.matrix();
    const Eigen::VectorXcd& psi = state.amplitudes;
    for (Eigen::Index col = 0; col < mat.outerSize(); ++col) {
        const auto m = static_cast<Eigen::Index>(sector.configuration_of_state(static_cast<std::size_t>(col)));
        for (SparseMatrixXcd::InnerIterator it(mat, col); it; ++it) {
            const auto n = static_cast<Eigen::Index>(sector.configuration_of_state(static_cast<std::size_t>(it.row())));
            j(n, m) += current_term(psi(it.row()), it.value(), psi(col));
        }
    }
    return j;
}

double JumpRateTable::exit_rate() const
{
    double total = 0.0;
    for (const auto& entry : rates) {
        total += entry.second;
    }
    return total;
}

JumpRateTable jump_rates(const PilotState& state, const HamiltonianMatrix& h, std::size_t source,
                         double node_threshold)
{
    const double d_m = class_weight(state.amplitudes, h.sector(), source);
    return rates_from_column(state.time, source, d_m, current_column(state.amplitudes, h, source), node_threshold);
}

PilotEvolution::PilotEvolution(const PilotState& initial, HamiltonianMatrix h, double t_max, double dt_ctrl)
    : h_(std::move(h)), sector_(h_.sector_ptr()), t0_(initial.time), t_max_(t_max), dt_ctrl_(dt_ctrl)
{
    if (initial.amplitudes.size() != h_.dim()) {
        throw std::invalid_argument("PilotEvolution: state and Hamiltonian live on different sectors");
    }
    if (!(dt_ctrl > 0.0)) {
        throw std::invalid_argument("PilotEvolution: dt_ctrl must be positive");
    }
    if (t_max < t0_) {
        throw std::invalid_argument("PilotEvolution: t_max precedes the initial time");
    }
    spectral_coefficients_ = h_.eigenvectors().adjoint() * initial.amplitudes;

    const auto steps = static_cast<std::size_t>(std::ceil((t_max_ - t0_) / dt_ctrl_ - 1e-9));
    grid_.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        grid_.push_back(std::min(t_max_, t0_ + static_cast<double>(k) * dt_ctrl_));
    }
    grid_currents_.reserve(grid_.size());
    grid_marginals_.reserve(grid_.size());
    for (double t : grid_) {
        const PilotState s = state_at(t);
        grid_currents_.push_back(probability_currents(s, h_));
        grid_marginals_.push_back(marginal_distribution(s));
    }
}

PilotState PilotEvolution::state_at(double t) const
{
    const Eigen::VectorXcd phases =
        (h_.eigenvalues().cast<Complex>() * Complex{0.0, -(t - t0_)}).array().exp().matrix();
    return PilotState{sector_, h_.eigenvectors() * phases.cwiseProduct(spectral_coefficients_), t};
}

Eigen::VectorXd PilotEvolution::marginal_at(double t) const { return marginal_distribution(state_at(t)); }

JumpRateTable PilotEvolution::rates_on_grid(std::size_t k, std::size_t source, double node_threshold) const
{
    const auto m = static_cast<Eigen::Index>(source);
    return rates_from_column(grid_[k], source, grid_marginals_[k](m), grid_currents_[k].col(m), node_threshold);
}

JumpRateTable PilotEvolution::rates_at(double t, std::size_t source, double node_threshold) const
{
    return jump_rates(state_at(t), h_, source, node_threshold);
}

std::size_t BeableTrajectory::configuration_at(double t) const
{
    std::size_t c = initial;
    for (const JumpEvent& e : jumps) {
        if (e.time > t) {
            break;
        }
        c = e.to;
    }
    return c;
}

std::vector<double> BeableTrajectory::times() const
{
    std::vector<double> out{start_time};
    for (const JumpEvent& e : jumps) {
        out.push_back(e.time);
    }
    return out;
}

std::vector<std::size_t> BeableTrajectory::configurations() const
{
    std::vector<std::size_t> out{initial};
    for (const JumpEvent& e : jumps) {
        out.push_back(e.to);
    }
    return out;
}

BeableTrajectory sample_trajectory(const PilotEvolution& pilot, std::size_t initial, const SamplerOptions& options,
                                   Rng& rng)
{
    BeableTrajectory traj;
    traj.initial = initial;
    run_path(pilot, options, rng, traj);
    return traj;
}

BeableTrajectory sample_trajectory(const PilotEvolution& pilot, std::size_t initial, const SamplerOptions& options,
                                   std::uint64_t seed)
{
    Rng rng(seed);
    BeableTrajectory traj = sample_trajectory(pilot, initial, options, rng);
    traj.rng_seed = seed;
    return traj;
}

BeableTrajectory sample_trajectory(const PilotState& initial_state, std::size_t initial, const HamiltonianMatrix& h,
                                   double t_max, double dt_ctrl, std::uint64_t seed)
{
    const PilotEvolution pilot(initial_state, h, t_max, dt_ctrl);
    SamplerOptions options;
    options.dt_ctrl = dt_ctrl;
    return sample_trajectory(pilot, initial, options, seed);
}

std::vector<BeableTrajectory> sample_ensemble(const PilotEvolution& pilot, const EnsembleOptions& options)
{
    std::vector<BeableTrajectory> out(options.size);
    const Eigen::VectorXd start = pilot.marginal_at(pilot.start_time());

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            BeableTrajectory& traj = out[i];
            traj.rng_seed = stream_seed(options.master_seed, i);
            Rng rng(traj.rng_seed);
            traj.initial = sample_categorical(start, rng);
            try {
                run_path(pilot, options.sampler, rng, traj);
            } catch (const NodeVisitError& e) {
                traj.abort_reason = e.what();
            } catch (const StepFloorError& e) {
                traj.abort_reason = e.what();
            }
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, options.size));
    if (threads == 1) {
        work(0, options.size);
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (options.size + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(options.size, begin + chunk);
        if (begin < end) {
            pool.emplace_back(work, begin, end);
        }
    }
    for (auto& t : pool) {
        t.join();
    }
    return out;
}

EquivarianceReport equivariance_report(std::span<const BeableTrajectory> ensemble,
                                       const std::function<Eigen::VectorXd(double)>& target,
                                       std::span<const double> checkpoints, std::optional<double> tolerance)
{
    if (ensemble.empty()) {
        throw std::invalid_argument("equivariance_report: empty ensemble");
    }
    EquivarianceReport report;
    report.ensemble_size = ensemble.size();
    report.aborted = static_cast<std::size_t>(
        std::count_if(ensemble.begin(), ensemble.end(), [](const BeableTrajectory& t) { return t.abort_reason.has_value(); }));
    if (report.aborted == ensemble.size()) {
        throw std::invalid_argument("equivariance_report: every trajectory aborted");
    }
    for (double t : checkpoints) {
        const Eigen::VectorXd p = target(t);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(p.size());
        for (const BeableTrajectory& traj : ensemble) {
            if (!traj.abort_reason) {
                counts(static_cast<Eigen::Index>(traj.configuration_at(t))) += 1.0;
            }
        }
        report.checkpoints.push_back({t, compare_distribution(counts, p, tolerance)});
    }
    return report;
}

EquivarianceReport equivariance_report(std::span<const BeableTrajectory> ensemble, const PilotEvolution& pilot,
                                       std::span<const double> checkpoints, std::optional<double> tolerance)
{
    return equivariance_report(
        ensemble, [&pilot](double t) { return pilot.marginal_at(t); }, checkpoints, tolerance);
}

} // namespace bellsim
