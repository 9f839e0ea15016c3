#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjbpen/fd_models.hpp"

namespace hjbpen {

/// Bad flags, config keys or solver/penalty combinations.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Experiment { investment, early_exercise };
enum class SolverKind { penalty, penalty_linesearch, policy, explicit_baseline };

Experiment parse_experiment(const std::string& s);
SolverKind parse_solver(const std::string& s);
std::string to_string(Experiment e);
std::string to_string(SolverKind s);

struct RunConfig {
    Experiment experiment = Experiment::investment;
    std::size_t M = 50;
    std::size_t N = 50;
    SolverKind solver = SolverKind::penalty;
    double rho = 1e6;
    PenaltyTerm penalty;
    std::optional<double> u0;
    double tol = 1e-8;
    /// Obstacle-branch scaling for policy iteration; the guess study's scaled
    /// run uses 1e6 when unset.
    std::optional<double> delta;
    /// Control grid size; the model default when unset.
    std::optional<std::size_t> grid_points;
    /// Output directory; nothing is written when empty.
    std::string out;

    std::vector<double> rhos{1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
    double reference_rho = 1e8;
    std::vector<double> u0_list{-150.0, -75.0, 0.0, 75.0, 150.0};
    std::vector<std::size_t> n_list{50, 100, 200, 400};

    /// Throws UsageError.
    void validate() const;
};

/// Applies one key/value pair. Keys use '_' or '-' interchangeably.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads `key = value` lines; '#' starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::string& path);

InvestmentModel investment_model(const RunConfig& cfg);
EarlyExerciseModel early_exercise_model(const RunConfig& cfg);

struct ExperimentRun {
    SolutionSurface surface;
    std::vector<SolveReport> steps;  // empty for the explicit scheme
    double runtime_seconds = 0.0;

    int max_iterations() const;
    double mean_iterations() const;
};

ExperimentRun run_investment(const RunConfig& cfg);
ExperimentRun run_early_exercise(const RunConfig& cfg);

/// One line with max/mean iterations and runtime.
std::string summary_line(const RunConfig& cfg, const ExperimentRun& run);

struct SweepRow {
    double rho = 0.0;
    double error_inf = 0.0;
    /// Local slope against the previous row.
    std::optional<double> rate;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    /// Least-squares slope of -log(error) against log(rho).
    double slope = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Needs at least 3 strictly increasing rho values.
SweepResult rho_sweep(std::span<const double> rhos, const std::function<double(double)>& error_at);

/// Single-step errors: from the reference at t = k, compare the penalised
/// step against the reference at t = 0.
SweepResult investment_rho_sweep(const RunConfig& cfg);
SweepResult early_exercise_rho_sweep(const RunConfig& cfg);
SweepResult cmd_rho_sweep_result(const RunConfig& cfg);

struct U0Row {
    double u0 = 0.0;
    double gap_inf = 0.0;
    double gap_rel = 0.0;
};

std::vector<U0Row> u0_sweep(std::span<const double> u0s, const std::function<RealVector(double)>& solve_for,
                            const RealVector& reference);
/// Penalty march per u0 against a policy-iteration march (investment only).
std::vector<U0Row> investment_u0_sweep(const RunConfig& cfg);

struct GuessRow {
    std::size_t N = 0;
    std::string solver;
    int iterations = 0;
};

/// Early exercise with M = 1: penalty Newton and unscaled policy iteration
/// from the payoff, scaled policy iteration from z = 1.
std::vector<GuessRow> guess_study(const RunConfig& cfg);

void write_surface_csv(std::ostream& os, const SolutionSurface& s);
void write_steps_csv(std::ostream& os, const std::vector<SolveReport>& steps);
void write_sweep_csv(std::ostream& os, const SweepResult& r);
void write_u0_csv(std::ostream& os, const std::vector<U0Row>& rows);
void write_guess_csv(std::ostream& os, const std::vector<GuessRow>& rows);

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

/// Command entry points; they print to `log` and return the process exit
/// code (0 success, 1 usage error, 2 solver failure).
int cmd_investment(const RunConfig& cfg, std::ostream& log);
int cmd_early_exercise(const RunConfig& cfg, std::ostream& log);
int cmd_rho_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_u0_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_guess_study(const RunConfig& cfg, std::ostream& log);

}  // namespace hjbpen
