#include <cmath>
#include <random>

#include "doctest.h"
#include "hjbpen/matrix_core.hpp"
#include "support/instances.hpp"

using namespace hjbpen;

TEST_CASE("check_kon on small matrices") {
    CHECK(check_kon({{2, -1}, {-0.5, 1}}).certified);
    CHECK(check_kon({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}).certified);

    const KonCheck r = check_kon({{1, -1}, {0, 1}});
    CHECK_FALSE(r.certified);
    REQUIRE(r.failing_row.has_value());
    CHECK(*r.failing_row == 0);

    const KonCheck pos = check_kon({{2, 0.5}, {0, 1}});
    CHECK_FALSE(pos.certified);
    CHECK(*pos.failing_row == 0);
    CHECK(*check_kon({{2, -1}, {-3, 2}}).failing_row == 1);
}

TEST_CASE("check_kon faults on NaN") {
    CHECK_THROWS_AS(check_kon({{NAN, 0}, {0, 1}}), std::domain_error);
}

TEST_CASE("band width is detected from the sparsity pattern") {
    const BandMatrix tri = BandMatrix::from_dense({{2, -1, 0, 0}, {-1, 2, -1, 0}, {0, -1, 2, -1}, {0, 0, -1, 2}});
    CHECK(tri.half_bandwidth() == 1);
    const BandMatrix full = BandMatrix::from_dense({{2, 0, -1}, {0, 2, 0}, {-1, 0, 2}});
    CHECK(full.half_bandwidth() == 2);
    CHECK(full(0, 2) == -1);
    CHECK(full.to_dense()[2][0] == -1);
    CHECK_THROWS_AS(BandMatrix(3, 1).set(0, 2, 1.0), std::out_of_range);
}

TEST_CASE("compose_rows copies rows") {
    const std::vector<KonMatrix> src = {KonMatrix::certify(BandMatrix::from_dense({{2, -1}, {-1, 2}})),
                                        KonMatrix::certify(BandMatrix::from_dense({{3, 0}, {0, 3}}))};
    const KonMatrix m = compose_rows(src, RowSelection{0, 1});
    CHECK(m.matrix().to_dense() == std::vector<std::vector<double>>{{2, -1}, {0, 3}});
    const KonMatrix same = compose_rows(src, RowSelection{0, 0});
    CHECK(same.matrix().to_dense() == src[0].matrix().to_dense());

    const std::vector<KonMatrix> bad = {src[0], KonMatrix::identity(3)};
    CHECK_THROWS_AS(compose_rows(bad, RowSelection{0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(compose_rows(src, RowSelection{0, 2}), std::invalid_argument);
}

TEST_CASE("compose_rows and sums stay certified") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + trial % 9;
        std::vector<KonMatrix> src;
        for (int s = 0; s < 3; ++s) src.push_back(testsupport::random_kon(rng, n, 1));
        RowSelection sel(n);
        for (auto& s : sel) s = rng() % 3;
        CHECK(check_kon(compose_rows(src, sel).matrix()).certified);

        const KonMatrix dense = testsupport::random_kon(rng, n, n - 1);
        CHECK(check_kon((dense + src[0]).matrix()).certified);
    }
}

TEST_CASE("solve_linear small cases") {
    const RealVector x = solve_linear(KonMatrix::identity(2), RealVector{7, -3});
    CHECK(x == RealVector{7, -3});
    const RealVector y = solve_linear(BandMatrix::from_dense({{2, -1}, {0, 1}}), RealVector{1, 1});
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(solve_linear(BandMatrix::from_dense({{1, -1}, {0, 1}}), RealVector{1, 1}), NotCertifiedError);
    CHECK_THROWS_AS(solve_linear(KonMatrix::identity(2), RealVector{1}), std::invalid_argument);
}

TEST_CASE("solve_linear agrees with a dense LU oracle and keeps b >= 0 nonnegative") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const std::size_t w = trial % 2 ? n - 1 : 1;
        const KonMatrix a = testsupport::random_kon(rng, n, w);
        const RealVector b = testsupport::random_vector(rng, n, 0.0, 2.0);
        const RealVector x = solve_linear(a, b);
        const RealVector ref = testsupport::dense_lu_solve(a.matrix().to_dense(), b);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(x[i] >= 0.0);
            CHECK(std::abs(x[i] - ref[i]) <= 1e-12 * (1.0 + std::abs(ref[i])));
        }
    }
}

TEST_CASE("solve_linear reproduces b on large tridiagonal systems") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {10u, 100u, 1000u}) {
        const KonMatrix a = testsupport::random_kon(rng, n, 1, 1e-3);
        const RealVector b = testsupport::random_vector(rng, n, -5.0, 5.0);
        const RealVector x = solve_linear(a, b);
        CHECK(max_abs_diff(a.multiply(x), b) <= 1e-10 * norm_inf(b));
    }
}
