#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "sno/errors.hpp"
#include "sno/matrix.hpp"
#include "sno/metrics.hpp"
#include "sno/rng.hpp"

using namespace sno;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(-10.0, 10.0);
    }
    return m;
}

} // namespace

TEST_CASE("rmse and mae vanish for identical fields") {
    Rng rng(1);
    const Matrix s = random_matrix(3, 7, rng);
    CHECK(rmse(s, s) == 0.0);
    CHECK(mae(s, s) == 0.0);
    CHECK(max_mae(s, s).max == 0.0);
}

TEST_CASE("constant error gives rmse equal to its magnitude") {
    Matrix s(4, 6);
    Matrix shat(4, 6);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            s(i, j) = 3.0;
            shat(i, j) = 3.0 - 0.75;
        }
    }
    CHECK(rmse(s, shat) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(mae(s, shat) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("mae ignores the sign of the errors") {
    const Matrix s = Matrix::from_rows({{1.0, -1.0}});
    const Matrix shat = Matrix::from_rows({{1.0 - 0.3, -1.0 + 0.3}});
    CHECK(mae(s, shat) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("max_mae picks out the worst timestamp") {
    const Matrix s = Matrix::from_rows({{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}});
    const Matrix shat = Matrix::from_rows({{1.0, 2.0, 3.0}, {3.0, 4.0, 5.0}});
    const MaxMaeResult result = max_mae(s, shat);
    REQUIRE(result.series.size() == 2);
    CHECK(result.series[0] == 0.0);
    CHECK(result.series[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(result.max == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("max_mae degenerates to mae for a single timestamp") {
    Rng rng(17);
    const Matrix s = random_matrix(1, 11, rng);
    const Matrix shat = random_matrix(1, 11, rng);
    const MaxMaeResult result = max_mae(s, shat);
    REQUIRE(result.series.size() == 1);
    CHECK(result.max == doctest::Approx(mae(s, shat)).epsilon(1e-14));
}

TEST_CASE("metrics match brute-force double loops on random arrays") {
    Rng rng(2718);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t nt = 1 + rng.below(5);
        const std::size_t n = 1 + rng.below(9);
        const Matrix s = random_matrix(nt, n, rng);
        const Matrix shat = random_matrix(nt, n, rng);

        double sq = 0.0, ab = 0.0;
        std::vector<double> series(nt, 0.0);
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double d = s(i, j) - shat(i, j);
                sq += d * d;
                ab += std::abs(d);
                series[i] += std::abs(d) / static_cast<double>(n);
            }
        }
        const double denom = static_cast<double>(nt * n);
        const double want_rmse = std::sqrt(sq / denom);
        const double want_mae = ab / denom;
        const double want_max = *std::max_element(series.begin(), series.end());

        CHECK(std::abs(rmse(s, shat) - want_rmse) < 1e-12);
        CHECK(std::abs(mae(s, shat) - want_mae) < 1e-12);
        const MaxMaeResult got = max_mae(s, shat);
        CHECK(std::abs(got.max - want_max) < 1e-12);
        REQUIRE(got.series.size() == nt);
        for (std::size_t i = 0; i < nt; ++i) CHECK(std::abs(got.series[i] - series[i]) < 1e-12);
    }
}

TEST_CASE("rmse dominates mae on random inputs") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix s = random_matrix(2 + rng.below(4), 3 + rng.below(6), rng);
        Matrix shat = s;
        for (std::size_t i = 0; i < shat.rows(); ++i) {
            for (std::size_t j = 0; j < shat.cols(); ++j) {
                shat(i, j) += rng.normal() * 0.5;
            }
        }
        CHECK(rmse(s, shat) >= mae(s, shat));
        CHECK(mae(s, shat) >= 0.0);
    }
}

TEST_CASE("metrics are invariant to consistent permutations") {
    Rng rng(31);
    const std::size_t nt = 3, n = 8;
    const Matrix s = random_matrix(nt, n, rng);
    const Matrix shat = random_matrix(nt, n, rng);

    std::vector<std::size_t> sperm(n);
    std::iota(sperm.begin(), sperm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(sperm[i - 1], sperm[rng.below(i)]);
    Matrix s_sp(nt, n), shat_sp(nt, n);
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s_sp(i, j) = s(i, sperm[j]);
            shat_sp(i, j) = shat(i, sperm[j]);
        }
    }
    CHECK(rmse(s_sp, shat_sp) == doctest::Approx(rmse(s, shat)).epsilon(1e-13));
    CHECK(mae(s_sp, shat_sp) == doctest::Approx(mae(s, shat)).epsilon(1e-13));
    CHECK(max_mae(s_sp, shat_sp).max == doctest::Approx(max_mae(s, shat).max).epsilon(1e-13));

    // Time-axis permutation preserves rmse and mae (max_mae series reorders).
    std::vector<std::size_t> tperm = {2, 0, 1};
    Matrix s_tp(nt, n), shat_tp(nt, n);
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s_tp(i, j) = s(tperm[i], j);
            shat_tp(i, j) = shat(tperm[i], j);
        }
    }
    CHECK(rmse(s_tp, shat_tp) == doctest::Approx(rmse(s, shat)).epsilon(1e-13));
    CHECK(mae(s_tp, shat_tp) == doctest::Approx(mae(s, shat)).epsilon(1e-13));
    CHECK(max_mae(s_tp, shat_tp).max == doctest::Approx(max_mae(s, shat).max).epsilon(1e-13));
}

TEST_CASE("pointwise difference is an absolute elementwise field") {
    const std::vector<double> s = {1.0, -1.0};
    const std::vector<double> shat = {0.0, 0.0};
    const std::vector<double> diff = pointwise_difference(s, shat);
    REQUIRE(diff.size() == 2);
    CHECK(diff[0] == 1.0);
    CHECK(diff[1] == 1.0);

    Rng rng(55);
    std::vector<double> a(13), b(13);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(-5.0, 5.0);
        b[i] = rng.uniform(-5.0, 5.0);
    }
    const std::vector<double> d = pointwise_difference(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(d[i] - std::abs(a[i] - b[i])) < 1e-15);
    }

    const std::vector<double> zero = pointwise_difference(a, a);
    for (const double v : zero) CHECK(v == 0.0);
}

TEST_CASE("metrics reject mismatched or empty shapes") {
    Rng rng(7);
    const Matrix a = random_matrix(2, 3, rng);
    const Matrix b = random_matrix(3, 2, rng);
    CHECK_THROWS_AS(rmse(a, b), DimensionError);
    CHECK_THROWS_AS(mae(a, b), DimensionError);
    CHECK_THROWS_AS(max_mae(a, b), DimensionError);
    CHECK_THROWS_AS(rmse(Matrix(), Matrix()), DimensionError);

    const std::vector<double> x = {1.0, 2.0};
    const std::vector<double> y = {1.0};
    CHECK_THROWS_AS(pointwise_difference(x, y), DimensionError);
}

TEST_CASE("compute_metrics assembles a consistent report") {
    Rng rng(123);
    const Matrix s = random_matrix(4, 9, rng);
    const Matrix shat = random_matrix(4, 9, rng);
    const MetricsReport report = compute_metrics(s, shat);
    CHECK(report.rmse == doctest::Approx(rmse(s, shat)).epsilon(1e-14));
    CHECK(report.mae == doctest::Approx(mae(s, shat)).epsilon(1e-14));
    CHECK(report.max_mae == doctest::Approx(max_mae(s, shat).max).epsilon(1e-14));
    CHECK(report.n_points == 9);
    CHECK(report.n_timestamps == 4);
    REQUIRE(report.max_mae_series.size() == 4);
    for (const double v : report.max_mae_series) CHECK(report.max_mae >= v);
    CHECK(report.rmse >= report.mae);
}
