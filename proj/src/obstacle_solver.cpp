#include "hjbpen/obstacle_solver.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "detail.hpp"

namespace hjbpen {

using detail::finish;
using detail::kDenominatorGuard;
using detail::row_apply;

ObstacleProblem::ObstacleProblem(HJBProblem base, KonMatrix a_tilde, RealVector b_tilde)
    : base_(std::move(base)), a_tilde_(std::move(a_tilde)), b_tilde_(std::move(b_tilde)) {
    if (a_tilde_.size() != base_.dimension() || b_tilde_.size() != base_.dimension())
        throw std::invalid_argument("ObstacleProblem: dimension mismatch");
    detail::require_finite(b_tilde_, "ObstacleProblem b_tilde");
}

namespace {

constexpr int kInnerMaxIter = 500;

void validate(const ObstacleConfig& cfg) {
    if (!(cfg.rho > 0.0) || !std::isfinite(cfg.rho)) throw std::invalid_argument("rho must be positive and finite");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) throw std::invalid_argument("delta must be positive");
    if (cfg.max_iter <= 0 || cfg.policy_max_iter <= 0) throw std::invalid_argument("max_iter must be positive");
    if (cfg.min_iter < 0 || cfg.min_iter > cfg.max_iter) throw std::invalid_argument("min_iter out of range");
}

void check_vector(const ObstacleProblem& p, std::span<const double> z, const char* what) {
    detail::require_length(z, p.dimension(), what);
    detail::require_finite(z, what);
}

std::size_t system_bandwidth(const ObstacleProblem& p) {
    return std::max(p.base().family().half_bandwidth(), p.a_tilde().half_bandwidth());
}

// Max-branch data at z: row argmaxes and the corresponding b entries.
struct MaxBranch {
    std::vector<RowChoice> best;
    RealVector b;
};

MaxBranch max_branch(const ObstacleProblem& p, std::span<const double> z) {
    const ControlledFamily& f = p.base().family();
    MaxBranch mb;
    mb.best = detail::scan_max(f, p.base().grid(), z);
    mb.b.resize(z.size());
    std::vector<double> scratch(2 * f.half_bandwidth() + 1);
    for (std::size_t i = 0; i < z.size(); ++i) row_apply(f, mb.best[i].control, i, z, scratch, mb.b[i]);
    return mb;
}

struct PenalisedEval {
    MaxBranch mb;
    RealVector violation;  // b~ - A~ z
    RealVector h;
    double ratio = 0.0;
};

PenalisedEval evaluate(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z) {
    PenalisedEval ev;
    ev.mb = max_branch(p, z);
    const RealVector az = p.a_tilde().multiply(z);
    const std::size_t n = z.size();
    ev.violation.resize(n);
    ev.h.resize(n);
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ev.violation[i] = p.b_tilde()[i] - az[i];
        ev.h[i] = ev.mb.best[i].value - cfg.rho * cfg.penalty.value(ev.violation[i]);
        double bi = ev.mb.b[i];
        if (ev.violation[i] > 0.0) bi += cfg.rho * p.b_tilde()[i];
        den = std::max(den, std::abs(bi));
    }
    ev.ratio = norm_inf(ev.h) / (den + kDenominatorGuard);
    return ev;
}

RealVector newton_like_from(const ObstacleProblem& p, const ObstacleConfig& cfg, const PenalisedEval& ev) {
    const ControlledFamily& f = p.base().family();
    const std::size_t n = p.dimension();
    detail::RowAssembler as(n, system_bandwidth(p));
    RealVector rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = as.add_family_row(f, ev.mb.best[i].control, i, 1.0);
        if (ev.violation[i] > 0.0) {
            as.add_matrix_row(p.a_tilde().matrix(), i, cfg.rho);
            rhs[i] += cfg.rho * p.b_tilde()[i];
        }
    }
    return solve_linear(KonMatrix::certify(as.take()), rhs);
}

struct OuterEval {
    MaxBranch mb;
    RealVector obstacle;  // A~ z - b~
    double ratio = 0.0;
};

OuterEval evaluate_outer(const ObstacleProblem& p, std::span<const double> z) {
    OuterEval ev;
    ev.mb = max_branch(p, z);
    ev.obstacle = p.a_tilde().multiply(z);
    double res = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        ev.obstacle[i] -= p.b_tilde()[i];
        const double m = ev.mb.best[i].value;
        const double o = ev.obstacle[i];
        res = std::max(res, std::abs(std::min(m, o)));
        den = std::max(den, std::abs(o <= m ? p.b_tilde()[i] : ev.mb.b[i]));
    }
    ev.ratio = res / (den + kDenominatorGuard);
    return ev;
}

// Solves the max-HJB system in which rows with obstacle[i] set are replaced by
// delta * (A~ z - b~)_i = 0. Howard iteration from z; nullopt if it stalls.
std::optional<RealVector> solve_branch_system(const ObstacleProblem& p, const std::vector<char>& obstacle_row,
                                              double delta, double tol, RealVector z) {
    const ControlledFamily& f = p.base().family();
    const std::size_t n = p.dimension();
    std::vector<std::size_t> prev_policy;
    for (int it = 0; it <= kInnerMaxIter; ++it) {
        const MaxBranch mb = max_branch(p, z);
        std::vector<std::size_t> policy(n);
        for (std::size_t i = 0; i < n; ++i) policy[i] = obstacle_row[i] ? 0 : mb.best[i].grid_index;
        if (it > 0) {
            if (policy == prev_policy) return z;
            const RealVector az = p.a_tilde().multiply(z);
            double res = 0.0;
            double den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (obstacle_row[i]) {
                    res = std::max(res, std::abs(az[i] - p.b_tilde()[i]));
                    den = std::max(den, std::abs(p.b_tilde()[i]));
                } else {
                    res = std::max(res, std::abs(mb.best[i].value));
                    den = std::max(den, std::abs(mb.b[i]));
                }
            }
            if (res / (den + kDenominatorGuard) <= tol) return z;
        }
        if (it == kInnerMaxIter) break;
        prev_policy = std::move(policy);

        detail::RowAssembler as(n, system_bandwidth(p));
        RealVector rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (obstacle_row[i]) {
                as.add_matrix_row(p.a_tilde().matrix(), i, delta);
                rhs[i] = delta * p.b_tilde()[i];
            } else {
                rhs[i] = as.add_family_row(f, mb.best[i].control, i, 1.0);
            }
        }
        z = solve_linear(KonMatrix::certify(as.take()), rhs);
    }
    return std::nullopt;
}

}  // namespace

RealVector obstacle_residual(const ObstacleProblem& p, std::span<const double> z) {
    check_vector(p, z, "obstacle_residual");
    const RealVector az = p.a_tilde().multiply(z);
    RealVector r(p.dimension());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = std::min(row_max_residual(p.base().family(), p.base().grid(), z, i).value, az[i] - p.b_tilde()[i]);
    return r;
}

RealVector penalty_residual_H(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z) {
    check_vector(p, z, "penalty_residual_H");
    return evaluate(p, cfg, z).h;
}

double penalised_obstacle_ratio(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z) {
    check_vector(p, z, "penalised_obstacle_ratio");
    return evaluate(p, cfg, z).ratio;
}

double obstacle_residual_ratio(const ObstacleProblem& p, std::span<const double> z) {
    check_vector(p, z, "obstacle_residual_ratio");
    return evaluate_outer(p, z).ratio;
}

RealVector obstacle_newton_like_step(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z) {
    if (cfg.penalty.is_smooth()) throw std::invalid_argument("obstacle_newton_like_step requires the max penalty");
    validate(cfg);
    check_vector(p, z, "obstacle_newton_like_step");
    return newton_like_from(p, cfg, evaluate(p, cfg, z));
}

SolveReport solve_penalised_obstacle(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0) {
    if (cfg.penalty.is_smooth())
        throw std::invalid_argument("solve_penalised_obstacle requires the max penalty; use the line-search solver");
    validate(cfg);
    check_vector(p, z0, "solve_penalised_obstacle");
    const detail::Stopwatch sw;

    SolveReport rep;
    rep.solution = std::move(z0);
    PenalisedEval ev = evaluate(p, cfg, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        rep.solution = newton_like_from(p, cfg, ev);
        ++rep.iterations;
        ev = evaluate(p, cfg, rep.solution);
        rep.residual_history.push_back(ev.ratio);
        if (cfg.keep_iterates) rep.iterates.push_back(rep.solution);
    }
}

SolveReport solve_penalised_obstacle_linesearch(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0) {
    if (!cfg.penalty.is_smooth()) throw std::invalid_argument("line-search Newton requires a smoothed penalty");
    validate(cfg);
    check_vector(p, z0, "solve_penalised_obstacle_linesearch");
    const detail::Stopwatch sw;
    const ControlledFamily& f = p.base().family();
    const std::size_t n = p.dimension();
    constexpr double sigma = 1e-4;

    SolveReport rep;
    rep.solution = std::move(z0);
    PenalisedEval ev = evaluate(p, cfg, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        detail::RowAssembler as(n, system_bandwidth(p));
        RealVector rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            as.add_family_row(f, ev.mb.best[i].control, i, 1.0);
            const double slope = cfg.penalty.derivative(ev.violation[i]);
            if (slope > 0.0) as.add_matrix_row(p.a_tilde().matrix(), i, cfg.rho * slope);
            rhs[i] = -ev.h[i];
        }
        const RealVector d = solve_linear(KonMatrix::certify(as.take()), rhs);

        double f0 = 0.0;
        for (double h : ev.h) f0 += 0.5 * h * h;
        double t = 1.0;
        RealVector trial(n);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = rep.solution[i] + t * d[i];
            PenalisedEval et = evaluate(p, cfg, trial);
            double ft = 0.0;
            for (double h : et.h) ft += 0.5 * h * h;
            if (ft <= (1.0 - 2.0 * sigma * t) * f0) {
                ev = std::move(et);
                break;
            }
            t *= 0.5;
            if (t < 1e-14) {
                finish(rep, sw, false, "line search stalled");
                return rep;
            }
        }
        rep.solution = trial;
        ++rep.iterations;
        rep.residual_history.push_back(ev.ratio);
        if (cfg.keep_iterates) rep.iterates.push_back(rep.solution);
    }
}

SolveReport policy_iteration_obstacle(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0) {
    validate(cfg);
    check_vector(p, z0, "policy_iteration_obstacle");
    const detail::Stopwatch sw;
    const std::size_t n = p.dimension();

    SolveReport rep;
    rep.solution = std::move(z0);
    OuterEval ev = evaluate_outer(p, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.policy_max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        // Ties go to the obstacle branch.
        std::vector<char> obstacle_row(n);
        for (std::size_t i = 0; i < n; ++i) obstacle_row[i] = cfg.delta * ev.obstacle[i] <= ev.mb.best[i].value;
        auto next = solve_branch_system(p, obstacle_row, cfg.delta, cfg.tol / 10.0, rep.solution);
        if (!next) {
            finish(rep, sw, false, "inner policy iteration did not converge");
            return rep;
        }
        rep.solution = std::move(*next);
        ++rep.iterations;
        ev = evaluate_outer(p, rep.solution);
        rep.residual_history.push_back(ev.ratio);
        if (cfg.keep_iterates) rep.iterates.push_back(rep.solution);
    }
}

}  // namespace hjbpen
