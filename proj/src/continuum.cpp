#include "bellsim/continuum.hpp"

#include "bellsim/quadrature.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bellsim {

namespace {

using Complex = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double x, double length)
{
    double y = std::fmod(x, length);
    if (y < 0.0) {
        y += length;
    }
    return y >= length ? 0.0 : y;
}

Positions wrap(Positions x, double length)
{
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = wrap(x(i), length);
    }
    return x;
}

FieldSample field_from_one_body(const Eigen::Vector2cd& psi)
{
    FieldSample s;
    s.rho = psi.squaredNorm();
    s.current.resize(1);
    s.current(0) = 2.0 * (std::conj(psi(0)) * psi(1)).real();
    return s;
}

FieldSample field_from_two_body(const Eigen::Matrix2cd& psi)
{
    FieldSample s;
    s.rho = psi.squaredNorm();
    s.current.resize(2);
    // alpha = sigma_1 on the first slot mixes rows, on the second slot columns.
    s.current(0) = 2.0 * (psi.row(0).conjugate().cwiseProduct(psi.row(1))).sum().real();
    s.current(1) = 2.0 * (psi.col(0).conjugate().cwiseProduct(psi.col(1))).sum().real();
    return s;
}

Positions velocity_at(const ContinuumState& state, double t, const Positions& x, double node_threshold)
{
    const FieldSample f = sample_field(state, t, x);
    if (!(f.rho >= node_threshold)) {
        std::ostringstream msg;
        msg << "node visit: rho = " << f.rho << " < " << node_threshold << " at t = " << t << ", X = ("
            << x.transpose() << ")";
        throw NodeVisitError(msg.str());
    }
    return f.current / f.rho;
}

Positions rk4_step(const ContinuumState& state, const Positions& x, double t, double h, double node_threshold)
{
    const Positions k1 = velocity_at(state, t, x, node_threshold);
    const Positions k2 = velocity_at(state, t + 0.5 * h, x + 0.5 * h * k1, node_threshold);
    const Positions k3 = velocity_at(state, t + 0.5 * h, x + 0.5 * h * k2, node_threshold);
    const Positions k4 = velocity_at(state, t + h, x + h * k3, node_threshold);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Positions guarded_step(const ContinuumState& state, const Positions& x, double t, double h,
                       const IntegratorOptions& options)
{
    try {
        return rk4_step(state, x, t, h, options.node_threshold);
    } catch (const NodeVisitError& e) {
        if (std::abs(h) * 0.5 < options.dt_min) {
            throw NodeVisitError(std::string(e.what()) + " (step halved to the floor " + std::to_string(options.dt_min)
                                 + ")");
        }
        const Positions mid = guarded_step(state, x, t, 0.5 * h, options);
        return guarded_step(state, mid, t + 0.5 * h, 0.5 * h, options);
    }
}

Positions integrate_core(const ContinuumState& state, const Positions& x0, double t_from, double t_to,
                         const IntegratorOptions& options, ContinuumTrajectory* record)
{
    if (!(options.dt > 0.0)) {
        throw std::invalid_argument("integrate_trajectory: dt must be positive");
    }
    const double ell = state.basis().box_length();
    Positions x = wrap(x0, ell);
    if (record) {
        record->times.push_back(t_from);
        record->positions.push_back(x);
    }
    const double span = t_to - t_from;
    if (span == 0.0) {
        return x;
    }
    // Validates the initial point.
    (void)velocity_at(state, t_from, x, options.node_threshold);
    const auto steps = static_cast<long>(std::max(1.0, std::ceil(std::abs(span) / options.dt - 1e-9)));
    const double h = span / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const double t = t_from + static_cast<double>(i) * h;
        x = wrap(guarded_step(state, x, t, h, options), ell);
        if (record) {
            record->times.push_back(i + 1 == steps ? t_to : t_from + static_cast<double>(i + 1) * h);
            record->positions.push_back(x);
        }
    }
    return x;
}

std::vector<double> uniform_nodes(double length, int points)
{
    std::vector<double> xs(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        xs[static_cast<std::size_t>(i)] = length * i / points;
    }
    return xs;
}

// rho and currents on a tensor grid built from factor tables.
struct GridField {
    Eigen::MatrixXd rho;
    Eigen::MatrixXd j1;
    Eigen::MatrixXd j2;
};

GridField two_body_grid(const ContinuumState& state, double t, std::span<const double> xs)
{
    const auto tables = state.factor_table(t, xs);
    const auto n = static_cast<Eigen::Index>(xs.size());
    GridField g{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::Matrix2cd psi = Eigen::Matrix2cd::Zero();
            for (std::size_t r = 0; r + 1 < tables.size(); r += 2) {
                psi.noalias() += tables[r].col(i) * tables[r + 1].col(k).transpose();
            }
            const FieldSample f = field_from_two_body(psi);
            g.rho(i, k) = f.rho;
            g.j1(i, k) = f.current(0);
            g.j2(i, k) = f.current(1);
        }
    }
    return g;
}

} // namespace

// ---------------------------------------------------------------------------
// ModeBasis

ModeBasis::ModeBasis(double box_length, int n_max, double mass)
    : box_length_(box_length), n_max_(n_max), mass_(mass)
{
    if (!(box_length > 0.0) || n_max < 0 || !(mass > 0.0)) {
        throw std::domain_error("ModeBasis: need box_length > 0, n_max >= 0, mass > 0");
    }
    const int count = 2 * n_max + 1;
    orbitals_.resize(2 * static_cast<std::size_t>(count));
    for (int k = -n_max; k <= n_max; ++k) {
        const double p = momentum(k);
        const double e = energy(k);
        const double weight = std::sqrt(mass_ / e);
        orbitals_[index(k, Branch::Positive)] = Orbital{k, Branch::Positive, p, e, weight * u(k)};
        orbitals_[index(k, Branch::Negative)] = Orbital{k, Branch::Negative, -p, -e, weight * v(k)};
    }
}

double ModeBasis::momentum(int k) const { return kTwoPi * k / box_length_; }

double ModeBasis::energy(int k) const { return std::hypot(momentum(k), mass_); }

std::size_t ModeBasis::index(int k, Branch branch) const
{
    if (k < -n_max_ || k > n_max_) {
        throw std::out_of_range("ModeBasis: wave number beyond the cutoff");
    }
    const auto offset = static_cast<std::size_t>(k + n_max_);
    return branch == Branch::Positive ? offset : static_cast<std::size_t>(2 * n_max_ + 1) + offset;
}

// ---------------------------------------------------------------------------
// ContinuumState

ContinuumState::ContinuumState(std::shared_ptr<const ModeBasis> basis, int omega, double time)
    : basis_(std::move(basis)), omega_(omega), time_(time)
{
}

void ContinuumState::restrict_to_active(const std::vector<Eigen::VectorXcd>& full)
{
    active_.clear();
    for (std::size_t j = 0; j < basis_->size(); ++j) {
        const bool used = std::any_of(full.begin(), full.end(), [j](const Eigen::VectorXcd& f) {
            return f(static_cast<Eigen::Index>(j)) != Complex{};
        });
        if (used) {
            active_.push_back(j);
        }
    }
    factors_.clear();
    for (const auto& f : full) {
        Eigen::VectorXcd reduced(static_cast<Eigen::Index>(active_.size()));
        for (std::size_t a = 0; a < active_.size(); ++a) {
            reduced(static_cast<Eigen::Index>(a)) = f(static_cast<Eigen::Index>(active_[a]));
        }
        factors_.push_back(std::move(reduced));
    }
}

ContinuumState ContinuumState::one_body(std::shared_ptr<const ModeBasis> basis, Eigen::VectorXcd coefficients,
                                        double time)
{
    if (coefficients.size() != static_cast<Eigen::Index>(basis->size())) {
        throw std::invalid_argument("ContinuumState: coefficient count does not match the mode basis");
    }
    ContinuumState s(std::move(basis), 1, time);
    s.restrict_to_active({coefficients});
    return s;
}

ContinuumState ContinuumState::two_body(std::shared_ptr<const ModeBasis> basis,
                                        std::vector<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> terms, double time)
{
    std::vector<Eigen::VectorXcd> full;
    for (auto& [a, b] : terms) {
        if (a.size() != static_cast<Eigen::Index>(basis->size()) || b.size() != a.size()) {
            throw std::invalid_argument("ContinuumState: coefficient count does not match the mode basis");
        }
        full.push_back(std::move(a));
        full.push_back(std::move(b));
    }
    if (full.empty()) {
        throw std::invalid_argument("ContinuumState: two-body state needs at least one term");
    }
    ContinuumState s(std::move(basis), 2, time);
    s.restrict_to_active(full);
    return s;
}

ContinuumState ContinuumState::slater(const ContinuumState& a, const ContinuumState& b)
{
    if (a.omega_ != 1 || b.omega_ != 1 || a.basis_ != b.basis_) {
        throw std::invalid_argument("slater: needs two one-quantum states over the same mode basis");
    }
    const Eigen::VectorXcd f = a.coefficient_matrix().col(0);
    const Eigen::VectorXcd g = b.coefficient_matrix().col(0);
    // |f g^T - g f^T|_F^2 = 2 (|f|^2 |g|^2 - |f^dagger g|^2)
    const double n2 = 2.0 * (f.squaredNorm() * g.squaredNorm() - std::norm(f.dot(g)));
    const double scale = n2 > 1e-300 ? 1.0 / std::sqrt(n2) : 1.0;
    return two_body(a.basis_, {{scale * f, g}, {-scale * g, f}}, a.time_);
}

ContinuumState ContinuumState::product(const ContinuumState& a, const ContinuumState& b)
{
    if (a.omega_ != 1 || b.omega_ != 1 || a.basis_ != b.basis_) {
        throw std::invalid_argument("product: needs two one-quantum states over the same mode basis");
    }
    const Eigen::VectorXcd f = a.coefficient_matrix().col(0);
    const Eigen::VectorXcd g = b.coefficient_matrix().col(0);
    const double n = f.norm() * g.norm();
    return two_body(a.basis_, {{f / n, g}}, a.time_);
}

ContinuumState ContinuumState::at_time(double t) const
{
    ContinuumState s = *this;
    s.time_ = t;
    return s;
}

ContinuumState ContinuumState::normalized() const
{
    const double n2 = norm_squared();
    if (!(n2 > 0.0)) {
        throw std::domain_error("ContinuumState: cannot normalize the zero state");
    }
    ContinuumState s = *this;
    const double scale = 1.0 / std::sqrt(n2);
    for (std::size_t f = 0; f < s.factors_.size(); f += static_cast<std::size_t>(omega_)) {
        s.factors_[f] *= scale;
    }
    return s;
}

Eigen::MatrixXcd ContinuumState::coefficient_matrix() const
{
    const auto n = static_cast<Eigen::Index>(basis_->size());
    Eigen::MatrixXcd reduced;
    if (omega_ == 1) {
        reduced = factors_[0];
    } else {
        reduced = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(active_.size()),
                                         static_cast<Eigen::Index>(active_.size()));
        for (std::size_t r = 0; r + 1 < factors_.size(); r += 2) {
            reduced += factors_[r] * factors_[r + 1].transpose();
        }
    }
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(n, omega_ == 1 ? 1 : n);
    for (std::size_t a = 0; a < active_.size(); ++a) {
        const auto ja = static_cast<Eigen::Index>(active_[a]);
        if (omega_ == 1) {
            full(ja, 0) = reduced(static_cast<Eigen::Index>(a), 0);
            continue;
        }
        for (std::size_t b = 0; b < active_.size(); ++b) {
            full(ja, static_cast<Eigen::Index>(active_[b])) =
                reduced(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    return full;
}

double ContinuumState::norm_squared() const
{
    if (omega_ == 1) {
        return factors_[0].squaredNorm();
    }
    // <C, C>_F from the factors: sum_{r,s} (a_r^H a_s)(b_r^H b_s).
    double total = 0.0;
    for (std::size_t r = 0; r + 1 < factors_.size(); r += 2) {
        for (std::size_t s = 0; s + 1 < factors_.size(); s += 2) {
            total += (factors_[r].dot(factors_[s]) * factors_[r + 1].dot(factors_[s + 1])).real();
        }
    }
    return total;
}

bool ContinuumState::is_antisymmetric(double tol) const
{
    if (omega_ != 2) {
        return true;
    }
    const Eigen::MatrixXcd c = coefficient_matrix();
    return (c + c.transpose()).cwiseAbs().maxCoeff() <= tol;
}

Eigen::Matrix2Xcd ContinuumState::orbital_values(double t, double x) const
{
    const double inv_sqrt_len = 1.0 / std::sqrt(basis_->box_length());
    Eigen::Matrix2Xcd values(2, static_cast<Eigen::Index>(active_.size()));
    for (std::size_t a = 0; a < active_.size(); ++a) {
        const Orbital& o = basis_->orbital(active_[a]);
        const Complex phase = std::polar(inv_sqrt_len, o.kappa * x - o.energy * t);
        values.col(static_cast<Eigen::Index>(a)) = o.spinor.cast<Complex>() * phase;
    }
    return values;
}

Eigen::Vector2cd ContinuumState::factor_value(const Eigen::VectorXcd& coeffs, const Eigen::Matrix2Xcd& orbitals) const
{
    return orbitals * coeffs;
}

Eigen::Vector2cd ContinuumState::one_body_value(double t, double x) const
{
    if (omega_ != 1) {
        throw std::logic_error("one_body_value on a two-quantum state");
    }
    return factor_value(factors_[0], orbital_values(t, x));
}

Eigen::Matrix2cd ContinuumState::two_body_value(double t, double x1, double x2) const
{
    if (omega_ != 2) {
        throw std::logic_error("two_body_value on a one-quantum state");
    }
    const Eigen::Matrix2Xcd o1 = orbital_values(t, x1);
    const Eigen::Matrix2Xcd o2 = orbital_values(t, x2);
    Eigen::Matrix2cd psi = Eigen::Matrix2cd::Zero();
    for (std::size_t r = 0; r + 1 < factors_.size(); r += 2) {
        psi.noalias() += factor_value(factors_[r], o1) * factor_value(factors_[r + 1], o2).transpose();
    }
    return psi;
}

std::vector<Eigen::Matrix2Xcd> ContinuumState::factor_table(double t, std::span<const double> xs) const
{
    std::vector<Eigen::Matrix2Xcd> tables(factors_.size(), Eigen::Matrix2Xcd(2, static_cast<Eigen::Index>(xs.size())));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Eigen::Matrix2Xcd o = orbital_values(t, xs[i]);
        for (std::size_t f = 0; f < factors_.size(); ++f) {
            tables[f].col(static_cast<Eigen::Index>(i)) = o * factors_[f];
        }
    }
    return tables;
}

// ---------------------------------------------------------------------------
// Fields

FieldSample sample_field(const ContinuumState& state, double t, const Positions& x)
{
    if (x.size() != state.omega()) {
        throw std::invalid_argument("sample_field: position count differs from omega");
    }
    if (state.omega() == 1) {
        return field_from_one_body(state.one_body_value(t, x(0)));
    }
    return field_from_two_body(state.two_body_value(t, x(0), x(1)));
}

Eigen::VectorXcd evaluate_wavefunction(const ContinuumState& state, const Positions& x)
{
    if (x.size() != state.omega()) {
        throw std::invalid_argument("evaluate_wavefunction: position count differs from omega");
    }
    if (state.omega() == 1) {
        return state.one_body_value(state.time(), x(0));
    }
    const Eigen::Matrix2cd psi = state.two_body_value(state.time(), x(0), x(1));
    return Eigen::Map<const Eigen::Vector4cd>(psi.data());
}

double density(const ContinuumState& state, const Positions& x) { return sample_field(state, state.time(), x).rho; }

Positions current(const ContinuumState& state, const Positions& x)
{
    return sample_field(state, state.time(), x).current;
}

Positions velocity(const ContinuumState& state, const Positions& x, double node_threshold)
{
    return velocity_at(state, state.time(), x, node_threshold);
}

// ---------------------------------------------------------------------------
// Trajectories

ContinuumTrajectory integrate_trajectory(const ContinuumState& state, const Positions& x0, double t_end,
                                         const IntegratorOptions& options)
{
    ContinuumTrajectory out;
    integrate_core(state, x0, state.time(), t_end, options, &out);
    return out;
}

Positions advance(const ContinuumState& state, const Positions& x0, double t_from, double t_to,
                  const IntegratorOptions& options)
{
    return integrate_core(state, x0, t_from, t_to, options, nullptr);
}

double continuity_residual(const ContinuumState& state, int points, double fd_dt)
{
    if (points < 3) {
        throw std::invalid_argument("continuity_residual: need at least 3 grid points");
    }
    const double ell = state.basis().box_length();
    const double h = ell / points;
    const double t = state.time();
    const std::vector<double> xs = uniform_nodes(ell, points);
    auto up = [points](int i) { return (i + 1) % points; };
    auto down = [points](int i) { return (i + points - 1) % points; };

    double worst = 0.0;
    if (state.omega() == 1) {
        std::vector<double> rho_plus(xs.size()), rho_minus(xs.size()), j(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            rho_plus[i] = field_from_one_body(state.one_body_value(t + fd_dt, xs[i])).rho;
            rho_minus[i] = field_from_one_body(state.one_body_value(t - fd_dt, xs[i])).rho;
            j[i] = field_from_one_body(state.one_body_value(t, xs[i])).current(0);
        }
        for (int i = 0; i < points; ++i) {
            const double drho = (rho_plus[i] - rho_minus[i]) / (2.0 * fd_dt);
            const double div = (j[up(i)] - j[down(i)]) / (2.0 * h);
            worst = std::max(worst, std::abs(drho + div));
        }
        return worst;
    }
    const GridField plus = two_body_grid(state, t + fd_dt, xs);
    const GridField minus = two_body_grid(state, t - fd_dt, xs);
    const GridField now = two_body_grid(state, t, xs);
    for (int i = 0; i < points; ++i) {
        for (int k = 0; k < points; ++k) {
            const double drho = (plus.rho(i, k) - minus.rho(i, k)) / (2.0 * fd_dt);
            const double div = (now.j1(up(i), k) - now.j1(down(i), k)) / (2.0 * h)
                               + (now.j2(i, up(k)) - now.j2(i, down(k))) / (2.0 * h);
            worst = std::max(worst, std::abs(drho + div));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Coarse graining

CoarseGrid::CoarseGrid(double box_length_, int boxes_)
    : box_length(box_length_), boxes(boxes_)
{
    if (!(box_length > 0.0) || boxes < 1) {
        throw std::domain_error("CoarseGrid: need box_length > 0 and boxes >= 1");
    }
}

int CoarseGrid::box_of(double x) const
{
    const double w = width();
    int idx = static_cast<int>(std::floor(x / w));
    idx = std::clamp(idx, 0, boxes - 1);
    // Left-closed boxes: a point on the boundary l * w belongs to box l.
    while (idx + 1 < boxes && (idx + 1) * w <= x) {
        ++idx;
    }
    while (idx > 0 && idx * w > x) {
        --idx;
    }
    return idx;
}

Configuration coarse_grain(const Positions& x, const CoarseGrid& grid)
{
    Configuration n(static_cast<std::size_t>(grid.boxes), 0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        ++n[static_cast<std::size_t>(grid.box_of(wrap(x(i), grid.box_length)))];
    }
    return n;
}

Eigen::VectorXd box_probabilities(const ContinuumState& state, const CoarseGrid& grid, int quadrature_order)
{
    const auto [nodes, weights] = gauss_legendre<double>(quadrature_order);
    const double w = grid.width();
    std::vector<double> xs;
    std::vector<double> ws;
    for (int b = 0; b < grid.boxes; ++b) {
        for (int q = 0; q < quadrature_order; ++q) {
            xs.push_back(w * (b + 0.5 * (nodes(q) + 1.0)));
            ws.push_back(0.5 * w * weights(q));
        }
    }
    const auto per_box = static_cast<std::size_t>(quadrature_order);
    const double t = state.time();
    if (state.omega() == 1) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(grid.boxes);
        const Eigen::Matrix2Xcd psi = state.factor_table(t, xs)[0];
        for (std::size_t i = 0; i < xs.size(); ++i) {
            p(static_cast<Eigen::Index>(i / per_box)) += ws[i] * psi.col(static_cast<Eigen::Index>(i)).squaredNorm();
        }
        return p;
    }
    const GridField g = two_body_grid(state, t, xs);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.boxes) * grid.boxes);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const auto cell = static_cast<Eigen::Index>(i / per_box + static_cast<std::size_t>(grid.boxes) * (k / per_box));
            p(cell) += ws[i] * ws[k] * g.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
    }
    return p;
}

Eigen::VectorXd box_histogram(std::span<const Positions> positions, const CoarseGrid& grid, int omega)
{
    const Eigen::Index cells = omega == 1 ? grid.boxes : static_cast<Eigen::Index>(grid.boxes) * grid.boxes;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(cells);
    for (const Positions& x : positions) {
        if (x.size() != omega) {
            throw std::invalid_argument("box_histogram: position count differs from omega");
        }
        Eigen::Index cell = grid.box_of(wrap(x(0), grid.box_length));
        if (omega == 2) {
            cell += static_cast<Eigen::Index>(grid.boxes) * grid.box_of(wrap(x(1), grid.box_length));
        }
        counts(cell) += 1.0;
    }
    return counts;
}

std::map<Configuration, double> configuration_probabilities(const ContinuumState& state, const CoarseGrid& grid,
                                                            int quadrature_order)
{
    const Eigen::VectorXd p = box_probabilities(state, grid, quadrature_order);
    std::map<Configuration, double> out;
    for (Eigen::Index cell = 0; cell < p.size(); ++cell) {
        Configuration n(static_cast<std::size_t>(grid.boxes), 0);
        ++n[static_cast<std::size_t>(cell % grid.boxes)];
        if (state.omega() == 2) {
            ++n[static_cast<std::size_t>(cell / grid.boxes)];
        }
        out[n] += p(cell);
    }
    return out;
}

std::string to_string(Factorizability f)
{
    switch (f) {
    case Factorizability::Factorizable:
        return "factorizable";
    case Factorizability::NonFactorizable:
        return "non-factorizable";
    case Factorizability::Indeterminate:
        return "indeterminate";
    }
    return "indeterminate";
}

FactorizabilityResult nonfactorizability_check(const ContinuumState& state, int points, double threshold)
{
    if (state.omega() != 2) {
        throw std::invalid_argument("nonfactorizability_check: needs a two-quantum state");
    }
    const std::vector<double> xs = uniform_nodes(state.basis().box_length(), points);
    const GridField g = two_body_grid(state, state.time(), xs);
    FactorizabilityResult out;
    out.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(g.j1).singularValues();
    if (g.j1.cwiseAbs().maxCoeff() <= 1e-12 * g.rho.maxCoeff()) {
        out.verdict = Factorizability::Indeterminate;
        return out;
    }
    out.ratio = out.singular_values.size() > 1 ? out.singular_values(1) / out.singular_values(0) : 0.0;
    out.verdict = out.ratio > threshold ? Factorizability::NonFactorizable : Factorizability::Factorizable;
    return out;
}

// ---------------------------------------------------------------------------
// Ensembles

double density_bound(const ContinuumState& state, int points_per_axis)
{
    const double ell = state.basis().box_length();
    double peak = 0.0;
    if (state.omega() == 1) {
        const std::vector<double> xs = uniform_nodes(ell, points_per_axis > 0 ? points_per_axis : 4096);
        const Eigen::Matrix2Xcd psi = state.factor_table(state.time(), xs)[0];
        peak = psi.colwise().squaredNorm().maxCoeff();
    } else {
        const std::vector<double> xs = uniform_nodes(ell, points_per_axis > 0 ? points_per_axis : 256);
        peak = two_body_grid(state, state.time(), xs).rho.maxCoeff();
    }
    return 1.25 * peak;
}

Positions sample_position(const ContinuumState& state, double bound, Rng& rng)
{
    const double ell = state.basis().box_length();
    Positions x(state.omega());
    for (;;) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x(i) = ell * uniform01(rng);
        }
        const double rho = density(state, x);
        if (rho > bound) {
            throw std::logic_error("sample_position: density exceeds the rejection bound");
        }
        if (uniform01(rng) * bound < rho) {
            return x;
        }
    }
}

std::size_t ContinuumEnsemble::aborted() const
{
    return static_cast<std::size_t>(
        std::count_if(abort_reason.begin(), abort_reason.end(), [](const auto& r) { return r.has_value(); }));
}

ContinuumEnsemble run_continuum_ensemble(const ContinuumState& state, const ContinuumEnsembleOptions& options)
{
    const double t0 = state.time();
    if (!std::is_sorted(options.checkpoints.begin(), options.checkpoints.end())
        || (!options.checkpoints.empty() && options.checkpoints.front() < t0)) {
        throw std::invalid_argument("run_continuum_ensemble: checkpoints must be ascending and >= t0");
    }
    const std::size_t n = options.size;
    ContinuumEnsemble out;
    out.initial.resize(n);
    out.abort_reason.resize(n);
    out.at_checkpoint.assign(options.checkpoints.size(), std::vector<Positions>(n));
    out.paths.resize(std::min(n, options.recorded_paths));
    const double bound = density_bound(state);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(stream_seed(options.master_seed, i));
            Positions x = sample_position(state, bound, rng);
            out.initial[i] = x;
            ContinuumTrajectory* record = i < out.paths.size() ? &out.paths[i] : nullptr;
            double t = t0;
            std::size_t c = 0;
            try {
                for (; c < options.checkpoints.size(); ++c) {
                    const double tc = options.checkpoints[c];
                    ContinuumTrajectory segment;
                    x = integrate_core(state, x, t, tc, options.integrator, record ? &segment : nullptr);
                    if (record) {
                        const std::size_t skip = record->times.empty() ? 0 : 1;
                        record->times.insert(record->times.end(), segment.times.begin() + skip, segment.times.end());
                        record->positions.insert(record->positions.end(), segment.positions.begin() + skip,
                                                 segment.positions.end());
                    }
                    out.at_checkpoint[c][i] = x;
                    t = tc;
                }
            } catch (const NodeVisitError& e) {
                out.abort_reason[i] = e.what();
            } catch (const StepFloorError& e) {
                out.abort_reason[i] = e.what();
            }
            for (; c < options.checkpoints.size(); ++c) {
                out.at_checkpoint[c][i] = Positions::Constant(state.omega(), std::numeric_limits<double>::quiet_NaN());
            }
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, n));
    if (threads == 1) {
        work(0, n);
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin < end) {
            pool.emplace_back(work, begin, end);
        }
    }
    for (auto& th : pool) {
        th.join();
    }
    return out;
}

EquivarianceReport continuum_equivariance_report(const ContinuumState& state, const ContinuumEnsemble& ensemble,
                                                 std::span<const double> checkpoints, const CoarseGrid& grid,
                                                 std::optional<double> tolerance)
{
    if (ensemble.initial.empty()) {
        throw std::invalid_argument("continuum_equivariance_report: empty ensemble");
    }
    if (checkpoints.size() != ensemble.at_checkpoint.size()) {
        throw std::invalid_argument("continuum_equivariance_report: checkpoint count mismatch");
    }
    EquivarianceReport report;
    report.ensemble_size = ensemble.initial.size();
    report.aborted = ensemble.aborted();
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        std::vector<Positions> alive;
        for (std::size_t i = 0; i < ensemble.initial.size(); ++i) {
            if (!ensemble.abort_reason[i]) {
                alive.push_back(ensemble.at_checkpoint[c][i]);
            }
        }
        const Eigen::VectorXd counts = box_histogram(alive, grid, state.omega());
        const Eigen::VectorXd target = box_probabilities(state.at_time(checkpoints[c]), grid);
        report.checkpoints.push_back({checkpoints[c], compare_distribution(counts, target, tolerance)});
    }
    return report;
}

} // namespace bellsim
