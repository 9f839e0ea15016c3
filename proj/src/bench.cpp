#include "hjbpen/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace hjbpen {

namespace {

using detail_clock = std::chrono::steady_clock;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != t.size() || !std::isfinite(v))
        throw UsageError("bad number for " + key + ": '" + text + "'");
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw UsageError("bad integer for " + key + ": '" + text + "'");
    try {
        return static_cast<std::size_t>(std::stoull(t));
    } catch (const std::exception&) {
        throw UsageError("bad integer for " + key + ": '" + text + "'");
    }
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

PenaltyConfig penalty_config(const RunConfig& cfg, double rho) {
    PenaltyConfig p;
    p.rho = rho;
    p.u0 = cfg.u0;
    p.penalty = cfg.penalty;
    p.tol = cfg.tol;
    // A time step always performs at least one update of the previous level.
    p.min_iter = 1;
    return p;
}

ObstacleConfig obstacle_config(const RunConfig& cfg, double rho, double delta) {
    ObstacleConfig o;
    o.rho = rho;
    o.penalty = cfg.penalty;
    o.tol = cfg.tol;
    o.min_iter = 1;
    o.delta = delta;
    return o;
}

SolveReport solve_hjb(const HJBProblem& p, const RunConfig& cfg, SolverKind kind, double rho, const RealVector& x0) {
    switch (kind) {
        case SolverKind::penalty:
            return solve_penalised(p, penalty_config(cfg, rho), x0);
        case SolverKind::penalty_linesearch:
            return solve_penalised_linesearch(p, penalty_config(cfg, rho), x0);
        case SolverKind::policy: {
            PolicyConfig pc;
            pc.tol = cfg.tol;
            pc.min_iter = 1;
            return policy_iteration(p, x0, pc);
        }
        case SolverKind::explicit_baseline:
            break;
    }
    throw UsageError("the explicit scheme is only available for the early-exercise experiment");
}

SolveReport solve_obstacle(const ObstacleProblem& p, const RunConfig& cfg, SolverKind kind, double rho, double delta,
                           const RealVector& z0) {
    const ObstacleConfig oc = obstacle_config(cfg, rho, delta);
    switch (kind) {
        case SolverKind::penalty:
            return solve_penalised_obstacle(p, oc, z0);
        case SolverKind::penalty_linesearch:
            return solve_penalised_obstacle_linesearch(p, oc, z0);
        case SolverKind::policy:
            return policy_iteration_obstacle(p, oc, z0);
        case SolverKind::explicit_baseline:
            break;
    }
    throw std::logic_error("solve_obstacle: explicit scheme has no step solver");
}

// Sweeps only vary rho, so policy iteration falls back to Newton-like steps.
SolverKind sweep_solver(const RunConfig& cfg) {
    return cfg.solver == SolverKind::penalty_linesearch ? SolverKind::penalty_linesearch : SolverKind::penalty;
}

TimeSteppingResult march_investment(const RunConfig& cfg, const InvestmentModel& m, SolverKind kind, double rho) {
    const SpatialGrid sg = m.spatial_grid(cfg.N);
    const TimeGrid tg(m.T, cfg.M);
    return run_time_stepping(
        RealVector(sg.points(), 1.0), sg, tg, [&](const RealVector& prev) { return build_investment_step(m, sg, tg, prev); },
        [&](const HJBProblem& p, const RealVector& prev) { return solve_hjb(p, cfg, kind, rho, prev); });
}

TimeSteppingResult march_early_exercise(const RunConfig& cfg, const EarlyExerciseModel& m, SolverKind kind,
                                        double rho) {
    const SpatialGrid sg = m.spatial_grid(cfg.N);
    const TimeGrid tg(m.T, cfg.M);
    const double delta = cfg.delta.value_or(1.0);
    return run_time_stepping(
        m.payoff_on(sg), sg, tg, [&](const RealVector& prev) { return build_early_exercise_step(m, sg, tg, prev); },
        [&](const ObstacleProblem& p, const RealVector& prev) { return solve_obstacle(p, cfg, kind, rho, delta, prev); });
}

void require_converged(const SolveReport& r, const char* what) {
    if (!r.converged) throw StepFailure(1, std::string(what) + ": " + r.message);
}

std::string join_path(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void prepare_out(const RunConfig& cfg) {
    if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        body();
        return 0;
    } catch (const UsageError& e) {
        log << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const StepFailure& e) {
        log << "solver failure: " << e.what() << '\n';
        return 2;
    } catch (const LinearSolveError& e) {
        log << "solver failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
}

template <class W, class T>
std::string render(W writer, const T& value) {
    std::ostringstream os;
    writer(os, value);
    return os.str();
}

}  // namespace

Experiment parse_experiment(const std::string& s) {
    if (s == "investment") return Experiment::investment;
    if (s == "early_exercise" || s == "early-exercise") return Experiment::early_exercise;
    throw UsageError("unknown experiment '" + s + "'");
}

SolverKind parse_solver(const std::string& s) {
    if (s == "penalty") return SolverKind::penalty;
    if (s == "penalty_linesearch" || s == "penalty-linesearch") return SolverKind::penalty_linesearch;
    if (s == "policy") return SolverKind::policy;
    if (s == "explicit") return SolverKind::explicit_baseline;
    throw UsageError("unknown solver '" + s + "'");
}

std::string to_string(Experiment e) { return e == Experiment::investment ? "investment" : "early_exercise"; }

std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::penalty: return "penalty";
        case SolverKind::penalty_linesearch: return "penalty_linesearch";
        case SolverKind::policy: return "policy";
        case SolverKind::explicit_baseline: return "explicit";
    }
    return "?";
}

void RunConfig::validate() const {
    if (M < 1) throw UsageError("M must be at least 1");
    if (N < 2) throw UsageError("N must be at least 2");
    if (!(rho > 0.0) || !(reference_rho > 0.0)) throw UsageError("rho must be positive");
    if (!(tol > 0.0)) throw UsageError("tol must be positive");
    if (delta && !(*delta > 0.0)) throw UsageError("delta must be positive");
    if (grid_points && *grid_points < 1) throw UsageError("grid-points must be at least 1");
    if (solver == SolverKind::penalty_linesearch && !penalty.is_smooth())
        throw UsageError("penalty_linesearch needs a smoothed penalty (--penalty smooth:<eps>)");
    if (solver == SolverKind::penalty && penalty.is_smooth())
        throw UsageError("the Newton-like penalty solver needs --penalty max; use penalty_linesearch for smoothing");
    if (solver == SolverKind::explicit_baseline && experiment != Experiment::early_exercise)
        throw UsageError("the explicit scheme is only available for the early-exercise experiment");
    for (double r : rhos)
        if (!(r > 0.0)) throw UsageError("rho list entries must be positive");
}

void apply_setting(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string v = trim(value);
    if (key == "experiment") cfg.experiment = parse_experiment(v);
    else if (key == "M") cfg.M = parse_count(key, v);
    else if (key == "N") cfg.N = parse_count(key, v);
    else if (key == "solver") cfg.solver = parse_solver(v);
    else if (key == "rho") cfg.rho = parse_real(key, v);
    else if (key == "penalty") {
        try {
            cfg.penalty = PenaltyTerm::parse(v);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    } else if (key == "u0") cfg.u0 = parse_real(key, v);
    else if (key == "tol") cfg.tol = parse_real(key, v);
    else if (key == "delta") cfg.delta = parse_real(key, v);
    else if (key == "grid_points") cfg.grid_points = parse_count(key, v);
    else if (key == "out") cfg.out = v;
    else if (key == "reference_rho") cfg.reference_rho = parse_real(key, v);
    else if (key == "rhos") {
        cfg.rhos.clear();
        for (const auto& s : split_list(v)) cfg.rhos.push_back(parse_real(key, s));
    } else if (key == "u0_list") {
        cfg.u0_list.clear();
        for (const auto& s : split_list(v)) cfg.u0_list.push_back(parse_real(key, s));
    } else if (key == "n_list") {
        cfg.n_list.clear();
        for (const auto& s : split_list(v)) cfg.n_list.push_back(parse_count(key, s));
    } else {
        throw UsageError("unknown setting '" + raw_key + "'");
    }
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

InvestmentModel investment_model(const RunConfig& cfg) {
    InvestmentModel m = InvestmentModel::standard();
    if (cfg.grid_points) m.control_points = *cfg.grid_points;
    m.validate();
    return m;
}

EarlyExerciseModel early_exercise_model(const RunConfig& cfg) {
    EarlyExerciseModel m = EarlyExerciseModel::standard();
    if (cfg.grid_points) m.control_points = *cfg.grid_points;
    m.validate();
    return m;
}

int ExperimentRun::max_iterations() const {
    int m = 0;
    for (const auto& s : steps) m = std::max(m, s.iterations);
    return m;
}

double ExperimentRun::mean_iterations() const {
    if (steps.empty()) return 0.0;
    double t = 0.0;
    for (const auto& s : steps) t += s.iterations;
    return t / static_cast<double>(steps.size());
}

ExperimentRun run_investment(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::investment) throw UsageError("run_investment called for another experiment");
    const InvestmentModel m = investment_model(cfg);
    const detail_clock::time_point start = detail_clock::now();
    TimeSteppingResult r = march_investment(cfg, m, cfg.solver, cfg.rho);
    const double secs = std::chrono::duration<double>(detail_clock::now() - start).count();
    return {std::move(r.surface), std::move(r.steps), secs};
}

ExperimentRun run_early_exercise(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::early_exercise) throw UsageError("run_early_exercise called for another experiment");
    const EarlyExerciseModel m = early_exercise_model(cfg);
    const detail_clock::time_point start = detail_clock::now();
    if (cfg.solver == SolverKind::explicit_baseline) {
        SolutionSurface s = run_explicit_baseline(m, m.spatial_grid(cfg.N), TimeGrid(m.T, cfg.M));
        const double secs = std::chrono::duration<double>(detail_clock::now() - start).count();
        return {std::move(s), {}, secs};
    }
    TimeSteppingResult r = march_early_exercise(cfg, m, cfg.solver, cfg.rho);
    const double secs = std::chrono::duration<double>(detail_clock::now() - start).count();
    return {std::move(r.surface), std::move(r.steps), secs};
}

std::string summary_line(const RunConfig& cfg, const ExperimentRun& run) {
    std::ostringstream os;
    os << "experiment=" << to_string(cfg.experiment) << " solver=" << to_string(cfg.solver) << " M=" << cfg.M
       << " N=" << cfg.N;
    if (cfg.solver != SolverKind::policy && cfg.solver != SolverKind::explicit_baseline)
        os << " rho=" << short_num(cfg.rho) << " penalty=" << cfg.penalty.to_string();
    os << " steps=" << run.steps.size() << " max_iterations=" << run.max_iterations()
       << " mean_iterations=" << short_num(run.mean_iterations()) << " runtime_s=" << short_num(run.runtime_seconds);
    return os.str();
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need matching series of length >= 2");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("loglog_slope: nonpositive value");
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SweepResult rho_sweep(std::span<const double> rhos, const std::function<double(double)>& error_at) {
    if (rhos.size() < 3) throw UsageError("a rho sweep needs at least 3 values");
    for (std::size_t i = 1; i < rhos.size(); ++i)
        if (!(rhos[i] > rhos[i - 1])) throw UsageError("rho values must be strictly increasing");
    SweepResult r;
    std::vector<double> errs;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        SweepRow row{rhos[i], error_at(rhos[i]), std::nullopt};
        if (i > 0 && row.error_inf > 0.0 && r.rows.back().error_inf > 0.0)
            row.rate = std::log(r.rows.back().error_inf / row.error_inf) / std::log(row.rho / r.rows.back().rho);
        errs.push_back(row.error_inf);
        r.rows.push_back(row);
    }
    r.slope = -loglog_slope(rhos, errs);
    return r;
}

SweepResult investment_rho_sweep(const RunConfig& cfg) {
    cfg.validate();
    const InvestmentModel m = investment_model(cfg);
    const SpatialGrid sg = m.spatial_grid(cfg.N);
    const TimeGrid tg(m.T, cfg.M);
    const SolutionSurface ref = transform_reference(solve_reference(m, sg, tg), m);
    const RealVector& start = ref.values[1];
    const RealVector& target = ref.values[0];
    const HJBProblem step = build_investment_step(m, sg, tg, start);
    const SolverKind kind = sweep_solver(cfg);
    return rho_sweep(cfg.rhos, [&](double rho) {
        const SolveReport r = solve_hjb(step, cfg, kind, rho, start);
        require_converged(r, "rho sweep step");
        return max_abs_diff(r.solution, target);
    });
}

SweepResult early_exercise_rho_sweep(const RunConfig& cfg) {
    cfg.validate();
    const EarlyExerciseModel m = early_exercise_model(cfg);
    const SpatialGrid sg = m.spatial_grid(cfg.N);
    const TimeGrid tg(m.T, cfg.M);
    const SolverKind kind = sweep_solver(cfg);
    const TimeSteppingResult ref = march_early_exercise(cfg, m, kind, cfg.reference_rho);
    const RealVector& start = ref.surface.values[1];
    const RealVector& target = ref.surface.values[0];
    const ObstacleProblem step = build_early_exercise_step(m, sg, tg, start);
    return rho_sweep(cfg.rhos, [&](double rho) {
        const SolveReport r = solve_obstacle(step, cfg, kind, rho, 1.0, start);
        require_converged(r, "rho sweep step");
        return max_abs_diff(r.solution, target);
    });
}

SweepResult cmd_rho_sweep_result(const RunConfig& cfg) {
    return cfg.experiment == Experiment::investment ? investment_rho_sweep(cfg) : early_exercise_rho_sweep(cfg);
}

std::vector<U0Row> u0_sweep(std::span<const double> u0s, const std::function<RealVector(double)>& solve_for,
                            const RealVector& reference) {
    const double scale = norm_inf(reference);
    std::vector<U0Row> rows;
    for (double u0 : u0s) {
        const double gap = max_abs_diff(solve_for(u0), reference);
        rows.push_back({u0, gap, scale > 0.0 ? gap / scale : gap});
    }
    return rows;
}

std::vector<U0Row> investment_u0_sweep(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::investment) throw UsageError("the u0 sweep applies to the investment experiment");
    if (cfg.u0_list.empty()) throw UsageError("u0 list is empty");
    const InvestmentModel m = investment_model(cfg);
    const RealVector reference = march_investment(cfg, m, SolverKind::policy, cfg.rho).surface.initial();
    return u0_sweep(cfg.u0_list, [&](double u0) {
        RunConfig c = cfg;
        c.u0 = u0;
        return march_investment(c, m, sweep_solver(cfg), cfg.rho).surface.initial();
    }, reference);
}

std::vector<GuessRow> guess_study(const RunConfig& cfg) {
    cfg.validate();
    const EarlyExerciseModel m = early_exercise_model(cfg);
    const SolverKind pen = sweep_solver(cfg);
    std::vector<GuessRow> rows;
    for (std::size_t n : cfg.n_list) {
        const SpatialGrid sg = m.spatial_grid(n);
        const TimeGrid tg(m.T, 1);
        const RealVector payoff = m.payoff_on(sg);
        const ObstacleProblem p = build_early_exercise_step(m, sg, tg, payoff);
        const SolveReport a = solve_obstacle(p, cfg, pen, cfg.rho, 1.0, payoff);
        require_converged(a, "guess study penalty solve");
        const SolveReport b = solve_obstacle(p, cfg, SolverKind::policy, cfg.rho, 1.0, payoff);
        require_converged(b, "guess study policy solve");
        const SolveReport c =
            solve_obstacle(p, cfg, SolverKind::policy, cfg.rho, cfg.delta.value_or(1e6), RealVector(sg.points(), 1.0));
        require_converged(c, "guess study scaled policy solve");
        rows.push_back({n, "penalty", a.iterations});
        rows.push_back({n, "policy", b.iterations});
        rows.push_back({n, "policy_scaled", c.iterations});
    }
    return rows;
}

void write_surface_csv(std::ostream& os, const SolutionSurface& s) {
    os << "y,t,value\n";
    const double k = s.time.k();
    for (std::size_t j = 0; j < s.values.size(); ++j) {
        const std::string t = num(static_cast<double>(j) * k);
        for (std::size_t i = 0; i < s.values[j].size(); ++i)
            os << num(s.space.node(i)) << ',' << t << ',' << num(s.values[j][i]) << '\n';
    }
}

void write_steps_csv(std::ostream& os, const std::vector<SolveReport>& steps) {
    os << "step,iterations,residual,runtime_ms\n";
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const SolveReport& r = steps[s];
        const double res = r.residual_history.empty() ? 0.0 : r.residual_history.back();
        os << (s + 1) << ',' << r.iterations << ',' << num(res) << ',' << short_num(r.wall_time * 1e3) << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const SweepResult& r) {
    os << "rho,error_inf,rate\n";
    for (const auto& row : r.rows) {
        os << num(row.rho) << ',' << num(row.error_inf) << ',';
        if (row.rate) os << num(*row.rate);
        os << '\n';
    }
}

void write_u0_csv(std::ostream& os, const std::vector<U0Row>& rows) {
    os << "u0,gap_inf,gap_rel\n";
    for (const auto& r : rows) os << num(r.u0) << ',' << num(r.gap_inf) << ',' << num(r.gap_rel) << '\n';
}

void write_guess_csv(std::ostream& os, const std::vector<GuessRow>& rows) {
    os << "N,solver,iterations\n";
    for (const auto& r : rows) os << r.N << ',' << r.solver << ',' << r.iterations << '\n';
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
        out << content;
        if (!out.flush()) throw std::runtime_error("write to '" + tmp + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

int run_experiment(const RunConfig& cfg, Experiment e, std::ostream& log) {
    return guarded(log, [&] {
        RunConfig c = cfg;
        c.experiment = e;
        const ExperimentRun run = e == Experiment::investment ? run_investment(c) : run_early_exercise(c);
        const std::string summary = summary_line(c, run);
        log << summary << '\n';
        if (c.out.empty()) return;
        prepare_out(c);
        write_file_atomic(join_path(c.out, "surface.csv"), render(write_surface_csv, run.surface));
        if (!run.steps.empty()) write_file_atomic(join_path(c.out, "steps.csv"), render(write_steps_csv, run.steps));
        write_file_atomic(join_path(c.out, "summary.txt"), summary + "\n");
    });
}

}  // namespace

int cmd_investment(const RunConfig& cfg, std::ostream& log) { return run_experiment(cfg, Experiment::investment, log); }

int cmd_early_exercise(const RunConfig& cfg, std::ostream& log) {
    return run_experiment(cfg, Experiment::early_exercise, log);
}

int cmd_rho_sweep(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        const SweepResult r = cmd_rho_sweep_result(cfg);
        const std::string csv = render(write_sweep_csv, r);
        log << csv << "slope=" << short_num(r.slope) << '\n';
        if (cfg.out.empty()) return;
        prepare_out(cfg);
        write_file_atomic(join_path(cfg.out, "rho_sweep.csv"), csv);
    });
}

int cmd_u0_sweep(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        const std::string csv = render(write_u0_csv, investment_u0_sweep(cfg));
        log << csv;
        if (cfg.out.empty()) return;
        prepare_out(cfg);
        write_file_atomic(join_path(cfg.out, "u0_sweep.csv"), csv);
    });
}

int cmd_guess_study(const RunConfig& cfg, std::ostream& log) {
    return guarded(log, [&] {
        RunConfig c = cfg;
        c.experiment = Experiment::early_exercise;
        c.M = 1;
        const std::string csv = render(write_guess_csv, guess_study(c));
        log << csv;
        if (c.out.empty()) return;
        prepare_out(c);
        write_file_atomic(join_path(c.out, "guess_study.csv"), csv);
    });
}

}  // namespace hjbpen
