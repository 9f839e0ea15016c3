#include "hjbpen/fd_models.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace hjbpen {

StepFailure::StepFailure(std::size_t step, const std::string& message)
    : std::runtime_error("time step " + std::to_string(step) + " failed: " + message), step_(step) {}

SpatialGrid::SpatialGrid(double y_min_, double y_max_, std::size_t n_) : y_min(y_min_), y_max(y_max_), N(n_) {
    if (N < 2) throw std::invalid_argument("spatial grid needs N >= 2");
    if (!(y_max > y_min) || !std::isfinite(y_min) || !std::isfinite(y_max))
        throw std::invalid_argument("spatial grid needs finite y_min < y_max");
}

double SpatialGrid::node(std::size_t i) const noexcept {
    if (i == N) return y_max;
    return y_min + static_cast<double>(i) * h();
}

RealVector SpatialGrid::nodes() const {
    RealVector y(points());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = node(i);
    return y;
}

TimeGrid::TimeGrid(double t_, std::size_t m_) : T(t_), M(m_) {
    if (M < 1) throw std::invalid_argument("time grid needs M >= 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time horizon must be positive");
}

SolutionSurface::SolutionSurface(SpatialGrid sg, TimeGrid tg)
    : space(sg), time(tg), values(tg.M + 1, RealVector(sg.points(), 0.0)) {}

int TimeSteppingResult::max_iterations() const {
    int m = 0;
    for (const auto& s : steps) m = std::max(m, s.iterations);
    return m;
}

double TimeSteppingResult::mean_iterations() const {
    if (steps.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : steps) total += s.iterations;
    return total / static_cast<double>(steps.size());
}

double TimeSteppingResult::total_seconds() const {
    double t = 0.0;
    for (const auto& s : steps) t += s.wall_time;
    return t;
}

InvestmentModel InvestmentModel::standard() {
    InvestmentModel m;
    const double kappa = m.kappa;
    m.a = [kappa](double y) {
        const double s = y - 0.5 - 0.5 * kappa;
        const double e = -0.5 + 0.5 * kappa;
        return -2.5 * s * s + 2.5 * e * e;
    };
    m.b = [](double y) { return -y + 0.55; };
    m.sigma = [](double y) { return y; };
    return m;
}

void InvestmentModel::validate() const {
    if (!a || !b || !sigma) throw std::invalid_argument("investment model: coefficient functions not set");
    if (!(mu > r && r > 0.0)) throw std::invalid_argument("investment model: need mu > r > 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("investment model: need 0 < gamma < 1");
    if (!(kappa > 0.0 && y_max > kappa)) throw std::invalid_argument("investment model: need 0 < kappa < y_max");
    if (!(T > 0.0)) throw std::invalid_argument("investment model: need T > 0");
    if (!(control_bound >= 0.0) || control_points == 0)
        throw std::invalid_argument("investment model: bad control grid");
}

ControlGrid InvestmentModel::control_grid() const {
    return ControlGrid::uniform({-control_bound, control_bound}, control_points);
}

double InvestmentModel::reference_exponent() const {
    return (1.0 - gamma) / (1.0 - gamma + rho_corr * rho_corr * gamma);
}

EarlyExerciseModel EarlyExerciseModel::standard() {
    EarlyExerciseModel m;
    m.a = [](double y) { return y; };
    m.b = [](double y) { return 0.3 * y; };
    m.payoff = [](double y) { return std::max(1.0 - y, 0.0); };
    return m;
}

void EarlyExerciseModel::validate() const {
    if (!a || !b || !payoff) throw std::invalid_argument("early-exercise model: coefficient functions not set");
    if (!(y_max > y_min)) throw std::invalid_argument("early-exercise model: need y_min < y_max");
    if (!(T > 0.0)) throw std::invalid_argument("early-exercise model: need T > 0");
    if (!(control_hi >= control_lo) || control_points == 0)
        throw std::invalid_argument("early-exercise model: bad control grid");
    if (payoff(y_min) < 0.0 || payoff(y_max) < 0.0) throw std::invalid_argument("early-exercise model: negative payoff");
}

ControlGrid EarlyExerciseModel::control_grid() const {
    return ControlGrid::uniform({control_lo, control_hi}, control_points);
}

RealVector EarlyExerciseModel::payoff_on(const SpatialGrid& sg) const {
    RealVector p(sg.points());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = payoff(sg.node(i));
    return p;
}

namespace {

// Band row (w = 1) of 1/k + L with L = -diff*D2 - beta*D1 - c, where D1 is the
// upwind one-sided difference: forward for beta >= 0, backward otherwise.
// One-sided terms that would leave the grid are dropped.
void upwind_row(double diff, double beta, double c, double inv_k, double h, std::size_t i, std::size_t N,
                std::span<double> band) {
    double lower = i > 0 ? -diff : 0.0;
    double upper = i < N ? -diff : 0.0;
    double diag = inv_k + 2.0 * diff - c;
    if (beta >= 0.0) {
        if (i < N) {
            diag += beta / h;
            upper -= beta / h;
        }
    } else if (i > 0) {
        diag -= beta / h;
        lower += beta / h;
    }
    band[0] = lower;
    band[1] = diag;
    band[2] = upper;
}

void check_prev(const RealVector& prev, const SpatialGrid& sg) {
    if (prev.size() != sg.points()) throw std::invalid_argument("previous time level has the wrong length");
    for (double v : prev)
        if (!std::isfinite(v)) throw std::invalid_argument("previous time level is not finite");
}

struct InvestmentNodes {
    RealVector a, b, sigma;
};

InvestmentNodes sample_investment(const InvestmentModel& m, const SpatialGrid& sg) {
    if (!m.a || !m.b || !m.sigma) throw std::invalid_argument("investment model: coefficient functions not set");
    InvestmentNodes s{RealVector(sg.points()), RealVector(sg.points()), RealVector(sg.points())};
    for (std::size_t i = 0; i < sg.points(); ++i) {
        const double y = sg.node(i);
        s.a[i] = (i == 0 || i == sg.N) ? 0.0 : m.a(y);
        s.b[i] = m.b(y);
        s.sigma[i] = m.sigma(y);
    }
    return s;
}

class InvestmentFamily final : public ControlledFamily {
public:
    InvestmentFamily(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg, const RealVector& prev)
        : m_(m), nodes_(sample_investment(m, sg)), N_(sg.N), h_(sg.h()), inv_k_(1.0 / tg.k()), rhs_(prev) {
        for (double& v : rhs_) v *= inv_k_;
    }

    std::size_t dimension() const override { return N_ + 1; }
    std::size_t half_bandwidth() const override { return 1; }

    double reaction(double u, std::size_t i) const {
        const double s = nodes_.sigma[i];
        return m_.gamma * m_.r + m_.gamma * (0.5 * (m_.gamma - 1.0) * s * s * u * u + (m_.mu - m_.r) * u);
    }

    double row(double u, std::size_t i, std::span<double> band) const override {
        const double a = nodes_.a[i];
        const double beta = nodes_.b[i] + m_.gamma * m_.rho_corr * nodes_.sigma[i] * a * u;
        upwind_row(0.5 * a * a / (h_ * h_), beta, reaction(u, i), inv_k_, h_, i, N_, band);
        return rhs_[i];
    }

private:
    InvestmentModel m_;
    InvestmentNodes nodes_;
    std::size_t N_;
    double h_;
    double inv_k_;
    RealVector rhs_;
};

class EarlyExerciseFamily final : public ControlledFamily {
public:
    EarlyExerciseFamily(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg, const RealVector& prev)
        : N_(sg.N), h_(sg.h()), inv_k_(1.0 / tg.k()), q_(m.gamma * (1.0 - m.rho_corr * m.rho_corr)),
          lower_(m.lower_boundary_value), upper_(m.upper_boundary_value), a_(sg.points()), drift_(sg.points()),
          rhs_(prev) {
        for (std::size_t i = 0; i < sg.points(); ++i) {
            const double y = sg.node(i);
            a_[i] = m.a(y);
            drift_[i] = m.b(y) - m.rho_corr * m.mu_over_sigma * a_[i];
        }
        for (double& v : rhs_) v *= inv_k_;
    }

    std::size_t dimension() const override { return N_ + 1; }
    std::size_t half_bandwidth() const override { return 1; }

    double row(double u, std::size_t i, std::span<double> band) const override {
        if (i == 0 || i == N_) {
            band[1] = 1.0;
            return i == 0 ? lower_ : upper_;
        }
        const double a2 = a_[i] * a_[i];
        // The operator carries +beta~ d/dy; upwind_row expects -beta d/dy.
        const double beta_tilde = -drift_[i] + q_ * a2 * u;
        upwind_row(0.5 * a2 / (h_ * h_), -beta_tilde, 0.0, inv_k_, h_, i, N_, band);
        return rhs_[i] + 0.5 * q_ * a2 * u * u;
    }

private:
    std::size_t N_;
    double h_;
    double inv_k_;
    double q_;
    double lower_;
    double upper_;
    RealVector a_;
    RealVector drift_;
    RealVector rhs_;
};

}  // namespace

HJBProblem build_investment_step(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                 const RealVector& prev) {
    check_prev(prev, sg);
    auto fam = std::make_shared<InvestmentFamily>(m, sg, tg, prev);
    ControlGrid grid = m.control_grid();
    double c_max = -INFINITY;
    for (std::size_t i = 0; i < sg.points(); ++i)
        for (double u : grid.points()) c_max = std::max(c_max, fam->reaction(u, i));
    if (1.0 / tg.k() <= c_max)
        throw TimeStepTooLarge("time step too large: 1/k = " + std::to_string(1.0 / tg.k()) +
                               " does not exceed the reaction rate " + std::to_string(c_max));
    return HJBProblem(std::move(fam), std::move(grid));
}

LinearSystem build_reference_step(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                  const RealVector& prev) {
    check_prev(prev, sg);
    const InvestmentNodes s = sample_investment(m, sg);
    const double inv_k = 1.0 / tg.k();
    const double g = m.gamma;
    const double excess = m.mu - m.r;
    const double scale = g * (1.0 - g + m.rho_corr * m.rho_corr * g) / (1.0 - g);
    BandMatrix A(sg.points(), 1);
    RealVector b(sg.points());
    for (std::size_t i = 0; i < sg.points(); ++i) {
        double beta = s.b[i];
        double c = scale * m.r;
        if (excess != 0.0) {
            beta += m.rho_corr * g * excess * s.a[i] / ((1.0 - g) * s.sigma[i]);
            c += scale * excess * excess / (2.0 * s.sigma[i] * s.sigma[i] * (1.0 - g));
        }
        if (inv_k <= c)
            throw TimeStepTooLarge("time step too large for the reference equation: 1/k = " + std::to_string(inv_k) +
                                   " does not exceed " + std::to_string(c));
        std::span<double> band = A.row_band(i);
        upwind_row(0.5 * s.a[i] * s.a[i] / (sg.h() * sg.h()), beta, c, inv_k, sg.h(), i, sg.N, band);
        b[i] = prev[i] * inv_k;
    }
    return {KonMatrix::certify(std::move(A)), std::move(b)};
}

SolutionSurface solve_reference(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg) {
    SolutionSurface s(sg, tg);
    s.values[tg.M].assign(sg.points(), 1.0);
    for (std::size_t j = tg.M; j-- > 0;) {
        const LinearSystem sys = build_reference_step(m, sg, tg, s.values[j + 1]);
        s.values[j] = solve_linear(sys.A, sys.b);
    }
    return s;
}

SolutionSurface transform_reference(const SolutionSurface& phi_tilde, const InvestmentModel& m) {
    const double p = m.reference_exponent();
    SolutionSurface out = phi_tilde;
    for (auto& row : out.values) {
        for (double& v : row) {
            if (!(v > 0.0)) throw std::domain_error("transform_reference: nonpositive value");
            v = std::pow(v, p);
        }
    }
    return out;
}

ObstacleProblem build_early_exercise_step(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                          const RealVector& prev) {
    check_prev(prev, sg);
    if (!m.a || !m.b || !m.payoff) throw std::invalid_argument("early-exercise model: coefficient functions not set");
    auto fam = std::make_shared<EarlyExerciseFamily>(m, sg, tg, prev);
    try {
        HJBProblem base(std::move(fam), m.control_grid());
        return ObstacleProblem(std::move(base), KonMatrix::identity(sg.points()), m.payoff_on(sg));
    } catch (const NotCertifiedError& e) {
        throw TimeStepTooLarge(e.what());
    }
}

RealVector explicit_baseline_step(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                  const RealVector& prev) {
    check_prev(prev, sg);
    const std::size_t N = sg.N;
    const double h = sg.h();
    const double k = tg.k();
    const double q = m.gamma * (1.0 - m.rho_corr * m.rho_corr);
    RealVector next(prev.size());
    for (std::size_t i = 1; i < N; ++i) {
        const double y = sg.node(i);
        const double a = m.a(y);
        const double drift = m.b(y) - m.rho_corr * m.mu_over_sigma * a;
        const double d2 = (prev[i + 1] - 2.0 * prev[i] + prev[i - 1]) / (h * h);
        // One-sided difference in the upwind direction of the linear drift,
        // reused inside the squared gradient term.
        const double d1 = drift >= 0.0 ? (prev[i + 1] - prev[i]) / h : (prev[i] - prev[i - 1]) / h;
        next[i] = prev[i] + k * (0.5 * a * a * d2 + drift * d1 - 0.5 * q * a * a * d1 * d1);
    }
    next[0] = m.lower_boundary_value;
    next[N] = m.upper_boundary_value;
    for (std::size_t i = 0; i <= N; ++i) next[i] = std::max(next[i], m.payoff(sg.node(i)));
    return next;
}

SolutionSurface run_explicit_baseline(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg) {
    SolutionSurface s(sg, tg);
    s.values[tg.M] = m.payoff_on(sg);
    for (std::size_t j = tg.M; j-- > 0;) s.values[j] = explicit_baseline_step(m, sg, tg, s.values[j + 1]);
    return s;
}

}  // namespace hjbpen
