#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjbpen/control_family.hpp"
#include "hjbpen/matrix_core.hpp"
#include "hjbpen/penalty.hpp"

namespace hjbpen {

/// Discrete HJB equation min_u (A_u x - b_u) = 0 over a control grid.
class HJBProblem {
public:
    /// Certifies A_u at every grid point; throws NotCertifiedError otherwise.
    HJBProblem(std::shared_ptr<const ControlledFamily> family, ControlGrid grid);

    const ControlledFamily& family() const noexcept { return *family_; }
    std::shared_ptr<const ControlledFamily> family_ptr() const noexcept { return family_; }
    const ControlGrid& grid() const noexcept { return grid_; }
    std::size_t dimension() const noexcept { return family_->dimension(); }

private:
    std::shared_ptr<const ControlledFamily> family_;
    ControlGrid grid_;
};

struct PenaltyConfig {
    double rho = 1e6;
    /// Defaults to the left end of the control grid.
    std::optional<double> u0;
    PenaltyTerm penalty;
    double tol = 1e-8;
    int max_iter = 100;
    /// Iterations to perform before the termination test may accept.
    int min_iter = 0;
    bool keep_iterates = false;
};

struct PolicyConfig {
    double tol = 1e-8;
    int max_iter = 1000;
    int min_iter = 0;
    bool keep_iterates = false;
};

struct SolveReport {
    RealVector solution;
    int iterations = 0;
    /// Termination ratio after each iteration.
    std::vector<double> residual_history;
    double wall_time = 0.0;
    bool converged = false;
    std::string message;
    /// x^1 .. x^n when requested by the config.
    std::vector<RealVector> iterates;
};

/// Component i is min over the grid of (A_u x - b_u)_i.
RealVector hjb_residual(const HJBProblem& p, std::span<const double> x);

/// G(x) = (A_u0 x - b_u0) - rho * max_u pen(b_u - A_u x).
RealVector penalty_residual_G(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x);

/// ||G(x)||_inf / ||b_u0 + rho b+||_inf, b+ taken from the rows with a positive violation.
double penalised_residual_ratio(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x);

/// ||min_u (A_u x - b_u)||_inf / ||b_u*||_inf with u* the row minimisers.
double hjb_residual_ratio(const HJBProblem& p, std::span<const double> x);

/// One step of (A_u0 + rho A^min) x' = b_u0 + rho b^min. Max penalty only.
RealVector newton_like_step(const HJBProblem& p, const PenaltyConfig& cfg, std::span<const double> x);

SolveReport solve_penalised(const HJBProblem& p, const PenaltyConfig& cfg, RealVector x0);

/// Damped Newton on G with merit 0.5 ||G||^2. Smoothed penalty only.
SolveReport solve_penalised_linesearch(const HJBProblem& p, const PenaltyConfig& cfg, RealVector x0);

/// Howard iteration on the row minimisers.
SolveReport policy_iteration(const HJBProblem& p, RealVector x0, const PolicyConfig& cfg = {});

/// Resolves cfg.u0 against the grid (left endpoint when unset).
double resolve_u0(const HJBProblem& p, const PenaltyConfig& cfg);

}  // namespace hjbpen
