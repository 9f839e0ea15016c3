#pragma once

#include <span>

#include "hjbpen/hjb_solver.hpp"

namespace hjbpen {

/// min{ max_u (A_u z - b_u), A~ z - b~ } = 0.
class ObstacleProblem {
public:
    ObstacleProblem(HJBProblem base, KonMatrix a_tilde, RealVector b_tilde);

    const HJBProblem& base() const noexcept { return base_; }
    const KonMatrix& a_tilde() const noexcept { return a_tilde_; }
    const RealVector& b_tilde() const noexcept { return b_tilde_; }
    std::size_t dimension() const noexcept { return base_.dimension(); }

private:
    HJBProblem base_;
    KonMatrix a_tilde_;
    RealVector b_tilde_;
};

struct ObstacleConfig {
    double rho = 1e6;
    PenaltyTerm penalty;
    double tol = 1e-8;
    int max_iter = 100;
    int min_iter = 0;
    /// Scales the obstacle branch in policy iteration.
    double delta = 1.0;
    /// Outer iteration cap for policy iteration.
    int policy_max_iter = 1000;
    bool keep_iterates = false;
};

RealVector obstacle_residual(const ObstacleProblem& p, std::span<const double> z);

/// H(z) = max_u (A_u z - b_u) - rho pen(b~ - A~ z).
RealVector penalty_residual_H(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z);

/// ||H(z)||_inf / ||b_umax + rho b+||_inf, b+ = b~ on rows with a positive violation.
double penalised_obstacle_ratio(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z);

/// ||obstacle_residual(z)||_inf over the row-wise b of the active branch.
double obstacle_residual_ratio(const ObstacleProblem& p, std::span<const double> z);

/// One step of (A_umax + rho A+) z' = b_umax + rho b+. Max penalty only.
RealVector obstacle_newton_like_step(const ObstacleProblem& p, const ObstacleConfig& cfg, std::span<const double> z);

SolveReport solve_penalised_obstacle(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0);

/// Damped Newton on H with merit 0.5 ||H||^2. Smoothed penalty only.
SolveReport solve_penalised_obstacle_linesearch(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0);

/// Outer branch selection with inner Howard iteration on the max-HJB rows.
/// Counts outer iterations.
SolveReport policy_iteration_obstacle(const ObstacleProblem& p, const ObstacleConfig& cfg, RealVector z0);

}  // namespace hjbpen
