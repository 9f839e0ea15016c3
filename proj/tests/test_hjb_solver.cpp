#include <cmath>
#include <random>

#include "doctest.h"
#include "hjbpen/hjb_solver.hpp"
#include "support/instances.hpp"

using namespace hjbpen;

namespace {

PenaltyConfig f1_config(double rho) {
    PenaltyConfig c;
    c.rho = rho;
    c.u0 = 1.0;
    return c;
}

bool nondecreasing(const RealVector& a, const RealVector& b, double slack) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (b[i] < a[i] - slack) return false;
    return true;
}

}  // namespace

TEST_CASE("hjb_residual on F1") {
    const HJBProblem p = testsupport::f1_problem();
    CHECK(hjb_residual(p, RealVector{0.5})[0] == doctest::Approx(0.0));
    CHECK(hjb_residual(p, RealVector{1.0})[0] == doctest::Approx(1.0));
    CHECK(hjb_residual(p, RealVector{0.0})[0] == -1.0);
}

TEST_CASE("penalty_residual_G on F1") {
    const HJBProblem p = testsupport::f1_problem();
    CHECK(std::abs(penalty_residual_G(p, f1_config(1), RealVector{0.4})[0]) <= 1e-15);
    CHECK(std::abs(penalty_residual_G(p, f1_config(10), RealVector{11.0 / 23.0})[0]) <= 1e-14);
    CHECK(penalty_residual_G(p, f1_config(1e4), RealVector{0.6})[0] == doctest::Approx(0.8));
}

TEST_CASE("newton_like_step on F1") {
    const HJBProblem p = testsupport::f1_problem();
    CHECK(newton_like_step(p, f1_config(1), RealVector{0.0})[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(newton_like_step(p, f1_config(10), RealVector{0.0})[0] == doctest::Approx(11.0 / 23.0).epsilon(1e-15));
    CHECK(newton_like_step(p, f1_config(10), RealVector{0.6})[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    PenaltyConfig smooth = f1_config(10);
    smooth.penalty = PenaltyTerm::smoothed(0.1);
    CHECK_THROWS_AS(newton_like_step(p, smooth, RealVector{0.0}), std::invalid_argument);
}

TEST_CASE("solve_penalised on F1") {
    const HJBProblem p = testsupport::f1_problem();
    const SolveReport r = solve_penalised(p, f1_config(1000), RealVector{0.0});
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK(std::abs(r.solution[0] - 1001.0 / 2003.0) <= 1e-12);

    for (double rho = 10; rho <= 10 * 1024; rho *= 2) {
        const SolveReport s = solve_penalised(p, f1_config(rho), RealVector{0.0});
        CHECK(std::abs(std::abs(s.solution[0] - 0.5) - 0.5 / (3 + 2 * rho)) <= 1e-15);
    }

    // optimal u0: no penalty needed at the solution
    PenaltyConfig opt = f1_config(1000);
    opt.u0 = 0.0;
    CHECK(solve_penalised(p, opt, RealVector{0.0}).solution[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("u0 resolution") {
    const HJBProblem p = testsupport::f1_problem();
    PenaltyConfig c;
    CHECK(resolve_u0(p, c) == 0.0);
    c.u0 = 0.7 + 1e-12;
    CHECK(resolve_u0(p, c) == doctest::Approx(0.7));
    c.u0 = 0.75;
    CHECK_THROWS_AS(resolve_u0(p, c), std::invalid_argument);
}

TEST_CASE("line-search Newton on F1") {
    const HJBProblem p = testsupport::f1_problem();
    PenaltyConfig c = f1_config(1000);
    c.penalty = PenaltyTerm::smoothed(1e-6);
    const SolveReport r = solve_penalised_linesearch(p, c, RealVector{0.0});
    CHECK(r.converged);
    CHECK(std::abs(r.solution[0] - 1001.0 / 2003.0) <= 1e-5);

    const SolveReport again = solve_penalised_linesearch(p, c, r.solution);
    CHECK(again.converged);
    CHECK(again.iterations == 0);

    CHECK_THROWS_AS(solve_penalised_linesearch(p, f1_config(10), RealVector{0.0}), std::invalid_argument);
    c.penalty = PenaltyTerm::max_penalty();
    CHECK_THROWS_AS(solve_penalised_linesearch(p, c, RealVector{0.0}), std::invalid_argument);
    c.penalty = PenaltyTerm::smoothed(1e-6);
    CHECK_THROWS_AS(solve_penalised(p, c, RealVector{0.0}), std::invalid_argument);
}

TEST_CASE("line-search Newton converges on random 5x5 families") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const HJBProblem p = testsupport::random_problem(rng, 5, 21, trial % 2 == 0);
        PenaltyConfig c;
        c.rho = 1e3;
        c.penalty = PenaltyTerm::smoothed(1e-4);
        const SolveReport r = solve_penalised_linesearch(p, c, testsupport::random_vector(rng, 5, -100, 100));
        CHECK_MESSAGE(r.converged, r.message);
    }
}

TEST_CASE("policy iteration on F1") {
    const HJBProblem p = testsupport::f1_problem();
    const SolveReport r = policy_iteration(p, RealVector{0.0});
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK(r.solution[0] == doctest::Approx(0.5).epsilon(1e-15));
    const SolveReport at = policy_iteration(p, RealVector{0.5});
    CHECK(at.converged);
    CHECK(at.iterations == 0);
}

TEST_CASE("iterates are nondecreasing from the first step") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const HJBProblem p = testsupport::random_problem(rng, n, 5 + trial % 17, trial % 3 == 0);
        const RealVector x0 = testsupport::random_vector(rng, n, -50, 50);

        PenaltyConfig pc;
        pc.rho = 1e4;
        pc.tol = 1e-14;
        pc.keep_iterates = true;
        const SolveReport a = solve_penalised(p, pc, x0);
        for (std::size_t k = 1; k < a.iterates.size(); ++k) CHECK(nondecreasing(a.iterates[k - 1], a.iterates[k], 1e-12));

        PolicyConfig qc;
        qc.tol = 1e-14;
        qc.keep_iterates = true;
        const SolveReport b = policy_iteration(p, x0, qc);
        for (std::size_t k = 1; k < b.iterates.size(); ++k) CHECK(nondecreasing(b.iterates[k - 1], b.iterates[k], 1e-12));
    }
}

TEST_CASE("penalised solution does not depend on the starting value") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const HJBProblem p = testsupport::random_problem(rng, 6, 21, trial % 2 == 1);
        PenaltyConfig c;
        const SolveReport a = solve_penalised(p, c, RealVector(6, 0.0));
        const SolveReport b = solve_penalised(p, c, RealVector(6, 1e3));
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(max_abs_diff(a.solution, b.solution) <= 10 * c.tol * std::max(1.0, norm_inf(a.solution)));
    }
}

TEST_CASE("penalty error is first order in 1/rho") {
    std::mt19937_64 rng(5150);
    for (int trial = 0; trial < 10; ++trial) {
        const HJBProblem p = testsupport::random_problem(rng, 4, 21, false);
        PenaltyConfig c;
        c.tol = 1e-14;
        c.rho = 1e8;
        const RealVector ref = solve_penalised(p, c, RealVector(4, 0.0)).solution;
        std::vector<double> errs, comp;
        for (double rho = 1e2; rho <= 1e6; rho *= 2) {
            c.rho = rho;
            const RealVector x = solve_penalised(p, c, RealVector(4, 0.0)).solution;
            errs.push_back(max_abs_diff(x, ref));
            comp.push_back(norm_inf(hjb_residual(p, x)) * rho);
        }
        for (std::size_t k = 1; k < errs.size(); ++k) {
            if (errs[k - 1] < 1e-12) continue;  // u0 already optimal on every row
            const double ratio = errs[k - 1] / errs[k];
            CHECK(ratio >= 1.7);
            CHECK(ratio <= 2.3);
            CHECK(comp[k] <= 2.0 * comp[k - 1] + 1e-9);
            CHECK(comp[k] >= 0.5 * comp[k - 1] - 1e-9);
        }
    }
}

TEST_CASE("large-rho penalty and policy iteration agree") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const HJBProblem p = testsupport::random_problem(rng, n, 11, trial % 2 == 0);
        PenaltyConfig c;
        c.rho = 1e8;
        const SolveReport a = solve_penalised(p, c, RealVector(n, 0.0));
        const SolveReport b = policy_iteration(p, RealVector(n, 0.0));
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        CHECK(max_abs_diff(a.solution, b.solution) <= 1e-6);
    }
}

TEST_CASE("solver input validation") {
    const HJBProblem p = testsupport::f1_problem();
    PenaltyConfig c = f1_config(10);
    CHECK_THROWS_AS(solve_penalised(p, c, RealVector{0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(solve_penalised(p, c, RealVector{NAN}), std::invalid_argument);
    c.rho = -1;
    CHECK_THROWS_AS(solve_penalised(p, c, RealVector{0.0}), std::invalid_argument);
    c = f1_config(10);
    c.max_iter = 0;
    CHECK_THROWS_AS(solve_penalised(p, c, RealVector{0.0}), std::invalid_argument);
}
