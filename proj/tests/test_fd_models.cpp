#include <cmath>

#include "doctest.h"
#include "hjbpen/fd_models.hpp"

using namespace hjbpen;

namespace {

InvestmentModel degenerate_investment() {
    InvestmentModel m = InvestmentModel::standard();
    m.r = 0.0;
    m.mu = 0.0;
    m.a = [](double) { return 0.0; };
    m.b = [](double) { return 0.0; };
    m.sigma = [](double) { return 0.0; };
    m.control_points = 11;
    return m;
}

PenaltyConfig march_penalty() {
    PenaltyConfig c;
    c.min_iter = 1;
    return c;
}

}  // namespace

TEST_CASE("grids") {
    CHECK_THROWS_AS(SpatialGrid(0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(SpatialGrid(1, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1, 0), std::invalid_argument);
    const SpatialGrid sg(0.1, 1.0, 50);
    CHECK(sg.points() == 51);
    CHECK(sg.node(50) == doctest::Approx(1.0));
    CHECK(TimeGrid(1.0, 4).k() == 0.25);
}

TEST_CASE("degenerate investment step returns the previous level") {
    const InvestmentModel m = degenerate_investment();
    const SpatialGrid sg = m.spatial_grid(10);
    const TimeGrid tg(1.0, 10);
    RealVector prev(sg.points());
    for (std::size_t i = 0; i < prev.size(); ++i) prev[i] = 1.0 + 0.3 * static_cast<double>(i);
    const HJBProblem p = build_investment_step(m, sg, tg, prev);
    const auto a = p.family().matrix(17.0).to_dense();
    for (std::size_t i = 0; i < prev.size(); ++i)
        for (std::size_t j = 0; j < prev.size(); ++j) CHECK(a[i][j] == doctest::Approx(i == j ? 10.0 : 0.0));
    const SolveReport r = solve_penalised(p, march_penalty(), prev);
    CHECK(r.converged);
    CHECK(max_abs_diff(r.solution, prev) <= 1e-14);
}

TEST_CASE("terminal condition is conserved without drift or reaction") {
    const InvestmentModel m = degenerate_investment();
    const SpatialGrid sg = m.spatial_grid(8);
    const TimeGrid tg(1.0, 6);
    const RealVector terminal(sg.points(), 2.5);
    const TimeSteppingResult res = run_time_stepping(
        terminal, sg, tg, [&](const RealVector& prev) { return build_investment_step(m, sg, tg, prev); },
        [](const HJBProblem& p, const RealVector& x0) { return solve_penalised(p, march_penalty(), x0); });
    for (const RealVector& row : res.surface.values) CHECK(max_abs_diff(row, terminal) <= 1e-13);
    CHECK(res.steps.size() == 6);
}

TEST_CASE("investment matrices are certified on the standard grid") {
    const InvestmentModel m = InvestmentModel::standard();
    const SpatialGrid sg = m.spatial_grid(50);
    const TimeGrid tg(1.0, 50);
    const HJBProblem p = build_investment_step(m, sg, tg, RealVector(sg.points(), 1.0));
    CHECK(p.grid().size() == 1001);
    CHECK(certify_family(p.family(), p.grid()).certified);
}

TEST_CASE("upwind stencil with a forward drift") {
    InvestmentModel m = degenerate_investment();
    m.b = [](double) { return 1.0; };
    m.sigma = [](double) { return 1.0; };
    const SpatialGrid sg(0.0, 1.0, 2);
    const TimeGrid tg(1.0, 4);
    const HJBProblem p = build_investment_step(m, sg, tg, RealVector(3, 0.0));
    const auto a = p.family().matrix(0.0).to_dense();
    const double h = 0.5, inv_k = 4.0;
    CHECK(a[1][1] == doctest::Approx(inv_k + 1.0 / h));
    CHECK(a[1][2] == doctest::Approx(-1.0 / h));
    CHECK(a[1][0] == 0.0);
    CHECK(a[2][2] == doctest::Approx(inv_k));
}

TEST_CASE("coarse time steps are rejected") {
    const InvestmentModel m = InvestmentModel::standard();
    const SpatialGrid sg = m.spatial_grid(20);
    CHECK_THROWS_AS(build_investment_step(m, sg, TimeGrid(1.0, 5), RealVector(sg.points(), 1.0)), TimeStepTooLarge);
    CHECK_NOTHROW(build_investment_step(m, sg, TimeGrid(1.0, 20), RealVector(sg.points(), 1.0)));
}

TEST_CASE("linear reference") {
    const InvestmentModel zero = degenerate_investment();
    const SpatialGrid sg0 = zero.spatial_grid(5);
    const LinearSystem id = build_reference_step(zero, sg0, TimeGrid(1.0, 2), RealVector(6, 1.0));
    CHECK(id.A.matrix().to_dense()[3][3] == 2.0);
    CHECK(id.A.matrix().to_dense()[3][4] == 0.0);

    const InvestmentModel m = InvestmentModel::standard();
    const SpatialGrid sg = m.spatial_grid(50);
    const SolutionSurface ref = solve_reference(m, sg, TimeGrid(1.0, 50));
    for (const RealVector& row : ref.values)
        for (double v : row) {
            CHECK(std::isfinite(v));
            CHECK(v > 0.0);
        }
    CHECK(ref.terminal() == RealVector(sg.points(), 1.0));
}

TEST_CASE("reference transform") {
    InvestmentModel m = InvestmentModel::standard();
    CHECK(m.reference_exponent() == doctest::Approx(25.0 / 26.0).epsilon(1e-15));
    const SpatialGrid sg = m.spatial_grid(4);
    const TimeGrid tg(1.0, 2);
    SolutionSurface ones(sg, tg);
    for (auto& row : ones.values) row.assign(sg.points(), 1.0);
    for (const auto& row : transform_reference(ones, m).values) CHECK(row == RealVector(sg.points(), 1.0));

    SolutionSurface s = ones;
    s.values[1][2] = 3.0;
    CHECK(transform_reference(s, m).values[1][2] == doctest::Approx(std::pow(3.0, 25.0 / 26.0)));
    m.rho_corr = 0.0;
    CHECK(transform_reference(s, m).values[1][2] == 3.0);
    s.values[0][0] = 0.0;
    CHECK_THROWS_AS(transform_reference(s, m), std::domain_error);
}

TEST_CASE("early exercise without diffusion") {
    EarlyExerciseModel m = EarlyExerciseModel::standard();
    m.a = [](double) { return 0.0; };
    m.b = [](double) { return 0.0; };
    const SpatialGrid sg = m.spatial_grid(10);
    const TimeGrid tg(1.0, 4);
    RealVector prev = m.payoff_on(sg);
    for (double& v : prev) v *= 0.5;
    prev.front() = 1.0;
    const ObstacleProblem p = build_early_exercise_step(m, sg, tg, prev);
    const auto a0 = p.base().family().matrix(-1.0).to_dense();
    const auto a1 = p.base().family().matrix(0.0).to_dense();
    CHECK(a0 == a1);
    CHECK(p.base().family().rhs(-1.0) == p.base().family().rhs(0.0));
    // min{(z - prev)/k, z - P} = 0 has the payoff as its solution when prev <= P
    const SolveReport r = policy_iteration_obstacle(p, ObstacleConfig{}, prev);
    CHECK(r.converged);
    CHECK(max_abs_diff(r.solution, m.payoff_on(sg)) <= 1e-12);
}

TEST_CASE("early exercise matrices are certified and boundary rows pinned") {
    const EarlyExerciseModel m = EarlyExerciseModel::standard();
    const SpatialGrid sg = m.spatial_grid(50);
    const ObstacleProblem p = build_early_exercise_step(m, sg, TimeGrid(1.0, 50), m.payoff_on(sg));
    CHECK(p.base().grid().size() == 102);
    CHECK(certify_family(p.base().family(), p.base().grid()).certified);
    const auto a = p.base().family().matrix(-0.5).to_dense();
    CHECK(a[0][0] == 1.0);
    CHECK(a[0][1] == 0.0);
    CHECK(a[50][50] == 1.0);
    CHECK(p.base().family().rhs(-0.5)[0] == 1.0);
    CHECK(p.base().family().rhs(-0.5)[50] == 0.0);
    CHECK(p.b_tilde() == m.payoff_on(sg));
}

TEST_CASE("early exercise surface dominates the payoff up to C/rho") {
    const EarlyExerciseModel m = EarlyExerciseModel::standard();
    const SpatialGrid sg = m.spatial_grid(40);
    const TimeGrid tg(1.0, 10);
    const RealVector payoff = m.payoff_on(sg);
    std::vector<double> c_values;
    for (double rho : {1e2, 1e3, 1e4}) {
        ObstacleConfig c;
        c.rho = rho;
        c.min_iter = 1;
        const TimeSteppingResult res = run_time_stepping(
            payoff, sg, tg, [&](const RealVector& prev) { return build_early_exercise_step(m, sg, tg, prev); },
            [&](const ObstacleProblem& p, const RealVector& z0) { return solve_penalised_obstacle(p, c, z0); });
        CHECK(res.surface.terminal() == payoff);
        double worst = 0.0;
        for (const RealVector& row : res.surface.values)
            for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, payoff[i] - row[i]);
        c_values.push_back(worst * rho);
    }
    for (double cv : c_values) CHECK(cv <= 2.0 * c_values.front() + 1e-9);
}

TEST_CASE("explicit baseline fixes the payoff without coefficients") {
    EarlyExerciseModel m = EarlyExerciseModel::standard();
    m.a = [](double) { return 0.0; };
    m.b = [](double) { return 0.0; };
    const SpatialGrid sg = m.spatial_grid(10);
    const RealVector p = m.payoff_on(sg);
    CHECK(explicit_baseline_step(m, sg, TimeGrid(1.0, 100), p) == p);
    const SolutionSurface s = run_explicit_baseline(EarlyExerciseModel::standard(), sg, TimeGrid(1.0, 400));
    for (const RealVector& row : s.values)
        for (std::size_t i = 0; i < row.size(); ++i) CHECK(row[i] >= p[i]);
}

TEST_CASE("a single time step is a single solve") {
    const EarlyExerciseModel m = EarlyExerciseModel::standard();
    const SpatialGrid sg = m.spatial_grid(20);
    const TimeGrid tg(1.0, 1);
    int solves = 0;
    const TimeSteppingResult res = run_time_stepping(
        m.payoff_on(sg), sg, tg, [&](const RealVector& prev) { return build_early_exercise_step(m, sg, tg, prev); },
        [&](const ObstacleProblem& p, const RealVector& z0) {
            ++solves;
            return policy_iteration_obstacle(p, ObstacleConfig{}, z0);
        });
    CHECK(solves == 1);
    CHECK(res.steps.size() == 1);
    CHECK(res.surface.values.size() == 2);
}

TEST_CASE("failed steps report their index") {
    const EarlyExerciseModel m = EarlyExerciseModel::standard();
    const SpatialGrid sg = m.spatial_grid(10);
    const TimeGrid tg(1.0, 3);
    ObstacleConfig c;
    c.tol = 1e-300;
    c.max_iter = 2;
    c.min_iter = 1;
    try {
        run_time_stepping(
            m.payoff_on(sg), sg, tg, [&](const RealVector& prev) { return build_early_exercise_step(m, sg, tg, prev); },
            [&](const ObstacleProblem& p, const RealVector& z0) { return solve_penalised_obstacle(p, c, z0); });
        FAIL("expected a step failure");
    } catch (const StepFailure& e) {
        CHECK(e.step() == 1);
    }
}
