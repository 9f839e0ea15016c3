#include "hjbpen/hjb_solver.hpp"

#include <cmath>
#include <stdexcept>

#include "detail.hpp"

namespace hjbpen {

using detail::finish;
using detail::kDenominatorGuard;
using detail::row_apply;

HJBProblem::HJBProblem(std::shared_ptr<const ControlledFamily> family, ControlGrid grid)
    : family_(std::move(family)), grid_(std::move(grid)) {
    if (!family_) throw std::invalid_argument("HJBProblem: null family");
    const KonCheck c = certify_family(*family_, grid_);
    if (!c.certified) throw NotCertifiedError(*c.failing_row, c.reason);
}

double resolve_u0(const HJBProblem& p, const PenaltyConfig& cfg) {
    if (!cfg.u0) return p.grid().front();
    const double span = p.grid().back() - p.grid().front();
    return p.grid()[p.grid().index_of(*cfg.u0, 1e-9 * std::max(span, 1.0))];
}

namespace {

void validate(const HJBProblem& p, const PenaltyConfig& cfg) {
    if (!(cfg.rho > 0.0) || !std::isfinite(cfg.rho)) throw std::invalid_argument("rho must be positive and finite");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (cfg.max_iter <= 0) throw std::invalid_argument("max_iter must be positive");
    if (cfg.min_iter < 0 || cfg.min_iter > cfg.max_iter) throw std::invalid_argument("min_iter out of range");
    (void)resolve_u0(p, cfg);
}

struct PenalisedEval {
    std::vector<RowChoice> best;  // argmin residual = argmax violation
    RealVector g;
    double ratio = 0.0;

    double violation(std::size_t i) const { return -best[i].value; }
};

PenalisedEval evaluate(const HJBProblem& p, const PenaltyConfig& cfg, double u0, std::span<const double> x) {
    const ControlledFamily& f = p.family();
    const std::size_t n = f.dimension();
    PenalisedEval ev;
    ev.best = detail::scan_min(f, p.grid(), x);
    ev.g.resize(n);
    std::vector<double> scratch(2 * f.half_bandwidth() + 1);
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double b0 = 0.0;
        const double ax0 = row_apply(f, u0, i, x, scratch, b0);
        const double viol = ev.violation(i);
        ev.g[i] = (ax0 - b0) - cfg.rho * cfg.penalty.value(viol);
        double bi = b0;
        if (viol > 0.0) {
            double bs = 0.0;
            row_apply(f, ev.best[i].control, i, x, scratch, bs);
            bi += cfg.rho * bs;
        }
        den = std::max(den, std::abs(bi));
    }
    ev.ratio = norm_inf(ev.g) / (den + kDenominatorGuard);
    return ev;
}

RealVector newton_like_from(const HJBProblem& p, const PenaltyConfig& cfg, double u0, const PenalisedEval& ev) {
    const ControlledFamily& f = p.family();
    const std::size_t n = f.dimension();
    detail::RowAssembler as(n, f.half_bandwidth());
    RealVector rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = as.add_family_row(f, u0, i, 1.0);
        if (ev.violation(i) > 0.0) rhs[i] += as.add_family_row(f, ev.best[i].control, i, cfg.rho);
    }
    return solve_linear(KonMatrix::certify(as.take()), rhs);
}

}  // namespace

RealVector hjb_residual(const HJBProblem& p, std::span<const double> x) {
    detail::require_length(x, p.dimension(), "hjb_residual");
    detail::require_finite(x, "hjb_residual");
    RealVector r(p.dimension());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = row_min_residual(p.family(), p.grid(), x, i).value;
    return r;
}

RealVector penalty_residual_G(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x) {
    detail::require_length(x, p.dimension(), "penalty_residual_G");
    detail::require_finite(x, "penalty_residual_G");
    return evaluate(p, cfg, resolve_u0(p, cfg), x).g;
}

double penalised_residual_ratio(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x) {
    detail::require_length(x, p.dimension(), "penalised_residual_ratio");
    return evaluate(p, cfg, resolve_u0(p, cfg), x).ratio;
}

RealVector newton_like_step(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x) {
    if (cfg.penalty.is_smooth()) throw std::invalid_argument("newton_like_step requires the max penalty");
    validate(p, cfg);
    detail::require_length(x, p.dimension(), "newton_like_step");
    detail::require_finite(x, "newton_like_step");
    const double u0 = resolve_u0(p, cfg);
    return newton_like_from(p, cfg, u0, evaluate(p, cfg, u0, x));
}

SolveReport solve_penalised(const HJBProblem& p, const PenaltyConfig& cfg, RealVector x0) {
    if (cfg.penalty.is_smooth())
        throw std::invalid_argument("solve_penalised requires the max penalty; use the line-search solver");
    validate(p, cfg);
    detail::require_length(x0, p.dimension(), "solve_penalised");
    detail::require_finite(x0, "solve_penalised");
    const detail::Stopwatch sw;
    const double u0 = resolve_u0(p, cfg);

    SolveReport rep;
    rep.solution = std::move(x0);
    PenalisedEval ev = evaluate(p, cfg, u0, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        rep.solution = newton_like_from(p, cfg, u0, ev);
        ++rep.iterations;
        ev = evaluate(p, cfg, u0, rep.solution);
        rep.residual_history.push_back(ev.ratio);
        if (cfg.keep_iterates) rep.iterates.push_back(rep.solution);
    }
}

SolveReport solve_penalised_linesearch(const HJBProblem& p, const PenaltyConfig& cfg, RealVector x0) {
    if (!cfg.penalty.is_smooth()) throw std::invalid_argument("line-search Newton requires a smoothed penalty");
    validate(p, cfg);
    detail::require_length(x0, p.dimension(), "solve_penalised_linesearch");
    detail::require_finite(x0, "solve_penalised_linesearch");
    const detail::Stopwatch sw;
    const double u0 = resolve_u0(p, cfg);
    const ControlledFamily& f = p.family();
    const std::size_t n = p.dimension();
    constexpr double sigma = 1e-4;

    SolveReport rep;
    rep.solution = std::move(x0);
    PenalisedEval ev = evaluate(p, cfg, u0, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        detail::RowAssembler as(n, f.half_bandwidth());
        RealVector rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            as.add_family_row(f, u0, i, 1.0);
            const double viol = ev.violation(i);
            if (viol > 0.0) as.add_family_row(f, ev.best[i].control, i, cfg.rho * cfg.penalty.derivative(viol));
            rhs[i] = -ev.g[i];
        }
        const RealVector d = solve_linear(KonMatrix::certify(as.take()), rhs);

        double f0 = 0.0;
        for (double g : ev.g) f0 += 0.5 * g * g;
        double t = 1.0;
        RealVector trial(n);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = rep.solution[i] + t * d[i];
            PenalisedEval et = evaluate(p, cfg, u0, trial);
            double ft = 0.0;
            for (double g : et.g) ft += 0.5 * g * g;
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

namespace {

struct PolicyEval {
    std::vector<RowChoice> best;
    double ratio = 0.0;
};

PolicyEval evaluate_policy(const HJBProblem& p, std::span<const double> x) {
    PolicyEval ev;
    ev.best = detail::scan_min(p.family(), p.grid(), x);
    std::vector<double> scratch(2 * p.family().half_bandwidth() + 1);
    double res = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < ev.best.size(); ++i) {
        double b = 0.0;
        row_apply(p.family(), ev.best[i].control, i, x, scratch, b);
        res = std::max(res, std::abs(ev.best[i].value));
        den = std::max(den, std::abs(b));
    }
    ev.ratio = res / (den + kDenominatorGuard);
    return ev;
}

}  // namespace

double hjb_residual_ratio(const HJBProblem& p, std::span<const double> x) {
    detail::require_length(x, p.dimension(), "hjb_residual_ratio");
    return evaluate_policy(p, x).ratio;
}

SolveReport policy_iteration(const HJBProblem& p, RealVector x0, const PolicyConfig& cfg) {
    if (cfg.max_iter <= 0 || cfg.min_iter < 0 || !(cfg.tol > 0.0))
        throw std::invalid_argument("policy_iteration: invalid config");
    detail::require_length(x0, p.dimension(), "policy_iteration");
    detail::require_finite(x0, "policy_iteration");
    const detail::Stopwatch sw;
    const ControlledFamily& f = p.family();
    const std::size_t n = p.dimension();

    SolveReport rep;
    rep.solution = std::move(x0);
    PolicyEval ev = evaluate_policy(p, rep.solution);
    while (true) {
        if (rep.iterations >= cfg.min_iter && ev.ratio <= cfg.tol) {
            finish(rep, sw, true);
            return rep;
        }
        if (rep.iterations >= cfg.max_iter) {
            finish(rep, sw, false, "max_iter exceeded");
            return rep;
        }
        detail::RowAssembler as(n, f.half_bandwidth());
        RealVector rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = as.add_family_row(f, ev.best[i].control, i, 1.0);
        rep.solution = solve_linear(KonMatrix::certify(as.take()), rhs);
        ++rep.iterations;
        ev = evaluate_policy(p, rep.solution);
        rep.residual_history.push_back(ev.ratio);
        if (cfg.keep_iterates) rep.iterates.push_back(rep.solution);
    }
}

}  // namespace hjbpen
