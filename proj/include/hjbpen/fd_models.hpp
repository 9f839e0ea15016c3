#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjbpen/hjb_solver.hpp"
#include "hjbpen/obstacle_solver.hpp"

namespace hjbpen {

class TimeStepTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A nonlinear solve inside a time march that did not converge. Steps are
/// numbered 1..M in marching order.
class StepFailure : public std::runtime_error {
public:
    StepFailure(std::size_t step, const std::string& message);
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct SpatialGrid {
    double y_min = 0.0;
    double y_max = 1.0;
    std::size_t N = 2;

    /// Throws std::invalid_argument unless N >= 2 and y_max > y_min.
    SpatialGrid(double y_min_, double y_max_, std::size_t n_);
    double h() const noexcept { return (y_max - y_min) / static_cast<double>(N); }
    double node(std::size_t i) const noexcept;
    std::size_t points() const noexcept { return N + 1; }
    RealVector nodes() const;
};

struct TimeGrid {
    double T = 1.0;
    std::size_t M = 1;

    TimeGrid(double t_, std::size_t m_);
    double k() const noexcept { return T / static_cast<double>(M); }
};

using Coefficient = std::function<double(double)>;

/// Utility-indifference investment problem on y in [kappa, 1].
struct InvestmentModel {
    double r = 0.3;
    double mu = 0.7;
    double rho_corr = -0.2;
    double gamma = 0.5;
    double kappa = 0.1;
    double y_max = 1.0;
    double T = 1.0;
    double control_bound = 150.0;
    std::size_t control_points = 1001;
    Coefficient a;
    Coefficient b;
    Coefficient sigma;

    /// The parameter set of the numerical study (a, b, sigma included).
    static InvestmentModel standard();
    void validate() const;
    SpatialGrid spatial_grid(std::size_t N) const { return {kappa, y_max, N}; }
    ControlGrid control_grid() const;
    /// Exponent p with phi = phi_tilde^p.
    double reference_exponent() const;
};

/// American-style claim under basis risk on y in [0, 5].
struct EarlyExerciseModel {
    double mu_over_sigma = 1.0;
    double rho_corr = 0.1;
    double gamma = 1.0;
    double y_min = 0.0;
    double y_max = 5.0;
    double T = 1.0;
    double control_lo = -1.0;
    double control_hi = 0.0;
    std::size_t control_points = 102;
    double lower_boundary_value = 1.0;
    double upper_boundary_value = 0.0;
    Coefficient a;
    Coefficient b;
    Coefficient payoff;

    static EarlyExerciseModel standard();
    void validate() const;
    SpatialGrid spatial_grid(std::size_t N) const { return {y_min, y_max, N}; }
    ControlGrid control_grid() const;
    RealVector payoff_on(const SpatialGrid& sg) const;
};

struct LinearSystem {
    KonMatrix A;
    RealVector b;
};

/// Values at t_j = j k for j = 0..M, each row over the N+1 spatial nodes.
struct SolutionSurface {
    SpatialGrid space;
    TimeGrid time;
    std::vector<RealVector> values;

    SolutionSurface(SpatialGrid sg, TimeGrid tg);
    const RealVector& at_time_index(std::size_t j) const { return values.at(j); }
    const RealVector& initial() const { return values.front(); }
    const RealVector& terminal() const { return values.back(); }
};

struct TimeSteppingResult {
    SolutionSurface surface;
    std::vector<SolveReport> steps;  // marching order: steps[0] solves for t_{M-1}

    int max_iterations() const;
    double mean_iterations() const;
    double total_seconds() const;
};

/// Min-form family for one implicit step of the investment HJB.
/// Throws TimeStepTooLarge if 1/k does not exceed the largest reaction rate.
HJBProblem build_investment_step(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                 const RealVector& prev);

/// One implicit step of the linear reference equation.
LinearSystem build_reference_step(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                  const RealVector& prev);

/// Backward march of the linear reference from phi_tilde = 1.
SolutionSurface solve_reference(const InvestmentModel& m, const SpatialGrid& sg, const TimeGrid& tg);

/// phi = phi_tilde^p pointwise. Throws std::domain_error on nonpositive values.
SolutionSurface transform_reference(const SolutionSurface& phi_tilde, const InvestmentModel& m);

/// Max-form obstacle problem for one implicit step of the early-exercise price.
ObstacleProblem build_early_exercise_step(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                          const RealVector& prev);

/// One forward Euler step followed by projection onto the payoff.
RealVector explicit_baseline_step(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg,
                                  const RealVector& prev);

SolutionSurface run_explicit_baseline(const EarlyExerciseModel& m, const SpatialGrid& sg, const TimeGrid& tg);

/// Backward march from the terminal row: each step is built from the
/// previous level, which is also the solver's starting value.
template <class Builder, class Solver>
TimeSteppingResult run_time_stepping(const RealVector& terminal, const SpatialGrid& sg, const TimeGrid& tg,
                                     Builder&& build, Solver&& solve) {
    TimeSteppingResult out{SolutionSurface(sg, tg), {}};
    if (terminal.size() != sg.points()) throw std::invalid_argument("terminal condition has the wrong length");
    out.surface.values[tg.M] = terminal;
    out.steps.reserve(tg.M);
    for (std::size_t j = tg.M; j-- > 0;) {
        const RealVector& prev = out.surface.values[j + 1];
        auto problem = build(prev);
        SolveReport rep = solve(problem, prev);
        if (!rep.converged) throw StepFailure(tg.M - j, rep.message);
        out.surface.values[j] = rep.solution;
        out.steps.push_back(std::move(rep));
    }
    return out;
}

}  // namespace hjbpen
