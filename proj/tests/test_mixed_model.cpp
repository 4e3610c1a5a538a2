#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "seatvc/mixed_model.hpp"
#include "seatvc/spline_basis.hpp"

using namespace seatvc;
using namespace seatvc::mixed;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(gen);
    return m;
}

Eigen::VectorXd random_vector(std::mt19937_64& gen, Eigen::Index n) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
    return v;
}

/// Ridge solution by stacking penalty rows and solving ordinary least squares
/// with Householder QR; written independently of the library's augmented
/// normal-equation path.
Eigen::VectorXd oracle_ridge(const PenalizedDesign& d, const std::vector<double>& lambdas) {
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.fixed_cols();
    const Eigen::Index m = p + d.random_cols();
    Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(n + d.random_cols(), m);
    if (p > 0) stacked.topLeftCorner(n, p) = d.fixed;
    Eigen::Index col = p;
    Eigen::Index row = n;
    for (std::size_t b = 0; b < d.random_blocks.size(); ++b) {
        const auto& z = d.random_blocks[b];
        stacked.block(0, col, n, z.cols()) = z;
        stacked.block(row, col, z.cols(), z.cols()) =
            std::sqrt(lambdas[b]) * Eigen::MatrixXd::Identity(z.cols(), z.cols());
        col += z.cols();
        row += z.cols();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + d.random_cols());
    rhs.head(n) = d.response;
    return stacked.householderQr().solve(rhs);
}

/// Textbook restricted likelihood evaluated through the dense marginal
/// covariance V0 = I + sum_b Z_b Z_b' / lambda_b; independent of the
/// library's profiled augmented-system formula.
double oracle_neg2_res_ll(const PenalizedDesign& d, const std::vector<double>& lambdas) {
    const Eigen::Index n = d.rows();
    const Eigen::Index p = d.fixed_cols();
    Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t b = 0; b < d.random_blocks.size(); ++b)
        v0.noalias() += d.random_blocks[b] * d.random_blocks[b].transpose() / lambdas[b];

    Eigen::LLT<Eigen::MatrixXd> llt(v0);
    REQUIRE(llt.info() == Eigen::Success);
    double logdet_v0 = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    Eigen::MatrixXd vinv_x = llt.solve(d.fixed);
    Eigen::VectorXd vinv_y = llt.solve(d.response);
    Eigen::MatrixXd xtvx = d.fixed.transpose() * vinv_x;
    Eigen::VectorXd beta = xtvx.ldlt().solve(d.fixed.transpose() * vinv_y);
    Eigen::VectorXd resid = d.response - d.fixed * beta;
    double quad = resid.dot(llt.solve(resid));
    double sigma2 = quad / static_cast<double>(n - p);
    double logdet_xtvx = std::log(xtvx.determinant());

    double df = static_cast<double>(n - p);
    return df * (1.0 + std::log(2.0 * std::numbers::pi)) + df * std::log(sigma2) + logdet_v0 +
           logdet_xtvx;
}

/// Smooth single-block spline problem used by the REML tests.
PenalizedDesign smooth_problem(unsigned seed, int n, double noise_sd,
                               const std::function<double(double)>& truth) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, noise_sd);
    spline::BasisSpec spec{.order = 2, .knots = {}};
    std::vector<double> times(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = (i + 0.5) / n;
    spec.knots = spline::place_knots(times, 8);

    PenalizedDesign d;
    d.fixed.resize(n, spec.order + 1);
    d.random_blocks.assign(1, Eigen::MatrixXd(n, spec.knot_count()));
    d.response.resize(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd row = spline::basis_row(times[static_cast<std::size_t>(i)], spec);
        d.fixed.row(i) = row.head(spec.order + 1);
        d.random_blocks[0].row(i) = row.tail(spec.knot_count());
        d.response[i] = truth(times[static_cast<std::size_t>(i)]) + noise(gen);
    }
    return d;
}

}  // namespace

TEST_CASE("fixed-lambda solution matches stacked least-squares ridge oracle") {
    std::mt19937_64 gen(42);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::Index n = 20 + rep;
        PenalizedDesign d;
        d.fixed = random_matrix(gen, n, 2);
        d.random_blocks.push_back(random_matrix(gen, n, 3));
        d.random_blocks.push_back(random_matrix(gen, n, 4));
        d.response = random_vector(gen, n);
        std::vector<double> lambdas = {2.5, 0.7};

        auto sol = fit_penalized_fixed_lambda(d, lambdas);
        Eigen::VectorXd oracle = oracle_ridge(d, lambdas);
        Eigen::VectorXd got(9);
        got << sol.fixed_coefficients, sol.random_coefficients[0], sol.random_coefficients[1];
        CHECK((got - oracle).norm() <= 1e-8 * oracle.norm());
    }
}

TEST_CASE("pure ridge system matches (X'X + lambda I)^{-1} X'y") {
    std::mt19937_64 gen(7);
    Eigen::MatrixXd x = random_matrix(gen, 20, 3);
    Eigen::VectorXd y = random_vector(gen, 20);
    double lambda = 2.5;

    PenalizedDesign d;
    d.fixed.resize(20, 0);
    d.random_blocks.push_back(x);
    d.response = y;

    auto sol = fit_penalized_fixed_lambda(d, {lambda});
    Eigen::MatrixXd a = x.transpose() * x + lambda * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd closed_form = a.fullPivLu().solve(x.transpose() * y);
    CHECK((sol.random_coefficients[0] - closed_form).norm() <= 1e-8 * closed_form.norm());
}

TEST_CASE("empty random part reduces to exact ordinary least squares") {
    std::mt19937_64 gen(3);
    PenalizedDesign d;
    d.fixed = random_matrix(gen, 25, 4);
    d.response = random_vector(gen, 25);

    auto sol = fit_penalized_fixed_lambda(d, {});
    Eigen::VectorXd ols = d.fixed.householderQr().solve(d.response);
    CHECK((sol.fixed_coefficients - ols).norm() <= 1e-10 * ols.norm());
    CHECK(sol.random_coefficients.empty());
}

TEST_CASE("heavy penalty drives random coefficients to zero and fixed part to OLS") {
    std::mt19937_64 gen(11);
    PenalizedDesign d;
    d.fixed = random_matrix(gen, 40, 3);
    d.random_blocks.push_back(random_matrix(gen, 40, 5));
    d.response = random_vector(gen, 40);

    auto sol = fit_penalized_fixed_lambda(d, {1e12});
    CHECK(sol.random_coefficients[0].lpNorm<Eigen::Infinity>() < 1e-6);
    Eigen::VectorXd ols = d.fixed.householderQr().solve(d.response);
    CHECK((sol.fixed_coefficients - ols).lpNorm<Eigen::Infinity>() < 1e-6);

    // Polynomial-limit invariant: fitted values within 1e-4 of the pure fixed fit.
    Eigen::VectorXd fixed_fit = d.fixed * ols;
    CHECK((sol.fitted - fixed_fit).lpNorm<Eigen::Infinity>() <= 1e-4);
}

TEST_CASE("fixed-lambda solution satisfies its augmented normal equations") {
    std::mt19937_64 gen(19);
    PenalizedDesign d;
    d.fixed = random_matrix(gen, 30, 3);
    d.random_blocks.push_back(random_matrix(gen, 30, 6));
    d.response = random_vector(gen, 30);
    std::vector<double> lambdas = {3.7};

    auto sol = fit_penalized_fixed_lambda(d, lambdas);
    Eigen::MatrixXd a(30, 9);
    a << d.fixed, d.random_blocks[0];
    Eigen::MatrixXd c = a.transpose() * a;
    c.diagonal().tail(6).array() += lambdas[0];
    Eigen::VectorXd s(9);
    s << sol.fixed_coefficients, sol.random_coefficients[0];
    Eigen::VectorXd gap = c * s - a.transpose() * d.response;
    CHECK(gap.norm() <= 1e-8 * d.response.norm());
}

TEST_CASE("restricted likelihood matches dense marginal-covariance oracle") {
    std::mt19937_64 gen(101);
    for (int rep = 0; rep < 8; ++rep) {
        Eigen::Index n = 25 + 3 * rep;
        PenalizedDesign d;
        d.fixed = random_matrix(gen, n, 2);
        d.random_blocks.push_back(random_matrix(gen, n, 3));
        d.random_blocks.push_back(random_matrix(gen, n, 4));
        d.response = random_vector(gen, n);

        for (double l1 : {1e-3, 0.5, 10.0, 1e4}) {
            for (double l2 : {0.02, 3.0, 500.0}) {
                double lib = reml_neg2_log_likelihood(d, {l1, l2});
                double oracle = oracle_neg2_res_ll(d, {l1, l2});
                CHECK(std::abs(lib - oracle) <= 1e-8 * std::max(1.0, std::abs(oracle)));
            }
        }
    }
}

TEST_CASE("REML optimum matches a brute-force profile grid within one cell") {
    auto d = smooth_problem(555, 150, 0.3, [](double t) { return std::sin(2.0 * std::numbers::pi * t); });
    auto fit = fit_reml(d);
    REQUIRE(fit.lambdas.size() == 1);

    const int grid_points = 200;
    const double lo = -8.0, hi = 12.0;
    double best = std::numeric_limits<double>::infinity();
    double best_log10 = lo;
    for (int i = 0; i < grid_points; ++i) {
        double log10_lambda = lo + (hi - lo) * i / (grid_points - 1);
        double val = reml_neg2_log_likelihood(d, {std::pow(10.0, log10_lambda)});
        if (val < best) {
            best = val;
            best_log10 = log10_lambda;
        }
    }
    double cell = (hi - lo) / (grid_points - 1);
    CHECK(std::abs(std::log10(fit.lambdas[0]) - best_log10) <= cell);
    CHECK(fit.stats.neg2_res_log_likelihood <= best + 1e-6);
}

TEST_CASE("polynomial truth pushes the block variance toward its floor") {
    auto d = smooth_problem(777, 200, 0.1, [](double t) { return 1.0 + 0.5 * t - 1.2 * t * t; });
    auto fit = fit_reml(d);

    // Smoothing should be heavy: lambda far above the scale where the spline
    // block could add visible wiggle.
    CHECK(fit.lambdas[0] >= 100.0);

    Eigen::VectorXd ols = d.fixed.householderQr().solve(d.response);
    Eigen::VectorXd poly_fit = d.fixed * ols;
    CHECK((fit.fitted - poly_fit).lpNorm<Eigen::Infinity>() <= 0.1);
}

TEST_CASE("noiseless polynomial response is recovered exactly with flags") {
    auto d = smooth_problem(888, 120, 0.0, [](double) { return 0.0; });
    Eigen::VectorXd beta0(3);
    beta0 << 0.4, -1.1, 2.2;
    d.response = d.fixed * beta0;

    auto fit = fit_reml(d);
    CHECK((fit.fixed_coefficients - beta0).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(fit.residual_variance <= 1e-12);
    CHECK(fit.near_zero_residual);
    REQUIRE(fit.boundary_flags.size() == 1);
    CHECK(fit.boundary_flags[0]);
}

TEST_CASE("objective history is non-increasing and statistics are consistent") {
    auto d = smooth_problem(910, 120, 0.4, [](double t) { return std::cos(4.0 * t); });
    auto fit = fit_reml(d);
    REQUIRE(!fit.objective_history.empty());
    for (std::size_t i = 1; i < fit.objective_history.size(); ++i)
        CHECK(fit.objective_history[i] <= fit.objective_history[i - 1] + 1e-9);

    CHECK(fit.converged);
    const int p_eff = fit.stats.effective_param_count;
    CHECK(p_eff == 3 + 1 + 1);
    CHECK(fit.stats.aic == doctest::Approx(fit.stats.neg2_res_log_likelihood + 2.0 * p_eff));
    CHECK(fit.stats.bic ==
          doctest::Approx(fit.stats.neg2_res_log_likelihood + p_eff * std::log(120.0)));
    CHECK(fit.residual_variance > 0.0);
    for (double v : fit.block_variances) CHECK(v >= 0.0);
}

TEST_CASE("fit metrics formula arithmetic") {
    auto m = fit_metrics(100.0, 5, static_cast<Eigen::Index>(std::exp(10.0)));
    CHECK(m.aic == doctest::Approx(110.0));
    CHECK(m.bic == doctest::Approx(150.0).epsilon(1e-4));
}

TEST_CASE("nested models do not fit worse at the same criterion") {
    // The quadratic-basis fit nests the linear-basis fit when both use the
    // same knots: compare best-penalized criteria on identical data.
    auto truth = [](double t) { return std::sin(2.0 * std::numbers::pi * t); };
    auto d_quad = smooth_problem(314, 160, 0.2, truth);

    PenalizedDesign d_lin = d_quad;
    d_lin.fixed = d_quad.fixed.leftCols(2);

    // Common comparison: penalized residual criterion of the wider model at
    // its own optimum cannot exceed the narrower model's when evaluated with
    // matching penalties (the narrower space is contained in the wider one).
    std::vector<double> lambdas = {5.0};
    auto wide = fit_penalized_fixed_lambda(d_quad, lambdas);
    auto narrow = fit_penalized_fixed_lambda(d_lin, lambdas);
    double wide_obj = wide.residuals.squaredNorm() + lambdas[0] * wide.random_coefficients[0].squaredNorm();
    double narrow_obj =
        narrow.residuals.squaredNorm() + lambdas[0] * narrow.random_coefficients[0].squaredNorm();
    CHECK(wide_obj <= narrow_obj + 1e-9);
}

TEST_CASE("refitting identical data is bit-identical") {
    auto d = smooth_problem(123, 140, 0.3, [](double t) { return t * (1.0 - t); });
    auto a = fit_reml(d);
    auto b = fit_reml(d);
    CHECK(a.stats.neg2_res_log_likelihood == b.stats.neg2_res_log_likelihood);
    CHECK(a.stats.aic == b.stats.aic);
    CHECK(a.lambdas[0] == b.lambdas[0]);
    CHECK((a.fixed_coefficients - b.fixed_coefficients).norm() == 0.0);
}

TEST_CASE("row permutation leaves estimates unchanged") {
    auto d = smooth_problem(222, 130, 0.25, [](double t) { return std::sin(5.0 * t); });

    PenalizedDesign shuffled = d;
    std::vector<Eigen::Index> perm(130);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(99);
    std::shuffle(perm.begin(), perm.end(), gen);
    for (Eigen::Index i = 0; i < 130; ++i) {
        shuffled.fixed.row(i) = d.fixed.row(perm[static_cast<std::size_t>(i)]);
        shuffled.random_blocks[0].row(i) = d.random_blocks[0].row(perm[static_cast<std::size_t>(i)]);
        shuffled.response[i] = d.response[perm[static_cast<std::size_t>(i)]];
    }

    auto a = fit_reml(d);
    auto b = fit_reml(shuffled);
    CHECK(std::abs(a.lambdas[0] - b.lambdas[0]) <= 1e-10 * a.lambdas[0]);
    CHECK((a.fixed_coefficients - b.fixed_coefficients).lpNorm<Eigen::Infinity>() <= 1e-10);
    for (Eigen::Index i = 0; i < 130; ++i)
        CHECK(std::abs(a.fitted[perm[static_cast<std::size_t>(i)]] - b.fitted[i]) <= 1e-10);
}

TEST_CASE("coefficient covariance is symmetric positive semidefinite") {
    auto d = smooth_problem(404, 110, 0.3, [](double t) { return 2.0 * t; });
    auto fit = fit_reml(d);
    const auto& cov = fit.coefficient_covariance;
    REQUIRE(cov.rows() == 3 + 8);
    CHECK((cov - cov.transpose()).lpNorm<Eigen::Infinity>() <= 1e-10 * cov.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * es.eigenvalues().maxCoeff());
}

TEST_CASE("validation rejects malformed designs and lambdas") {
    std::mt19937_64 gen(1);
    PenalizedDesign d;
    d.fixed = random_matrix(gen, 15, 2);
    d.random_blocks.push_back(random_matrix(gen, 15, 3));
    d.response = random_vector(gen, 15);

    SUBCASE("wrong lambda count") {
        CHECK_THROWS_AS(static_cast<void>(fit_penalized_fixed_lambda(d, {1.0, 2.0})), InvalidInput);
    }
    SUBCASE("non-positive lambda") {
        CHECK_THROWS_AS(static_cast<void>(fit_penalized_fixed_lambda(d, {0.0})), InvalidInput);
        CHECK_THROWS_AS(static_cast<void>(fit_penalized_fixed_lambda(d, {-1.0})), InvalidInput);
    }
    SUBCASE("rank-deficient fixed block") {
        PenalizedDesign bad = d;
        bad.fixed.col(1) = 2.0 * bad.fixed.col(0);
        CHECK_THROWS_WITH_AS(static_cast<void>(fit_penalized_fixed_lambda(bad, {1.0})),
                             doctest::Contains("rank-deficient"), InvalidInput);
    }
    SUBCASE("row mismatch") {
        PenalizedDesign bad = d;
        bad.response = random_vector(gen, 14);
        CHECK_THROWS_AS(static_cast<void>(fit_penalized_fixed_lambda(bad, {1.0})), InvalidInput);
    }
    SUBCASE("non-finite entry") {
        PenalizedDesign bad = d;
        bad.fixed(3, 1) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(static_cast<void>(fit_penalized_fixed_lambda(bad, {1.0})), InvalidInput);
    }
    SUBCASE("too few rows for REML") {
        PenalizedDesign tiny;
        tiny.fixed = random_matrix(gen, 3, 2);
        tiny.random_blocks.push_back(random_matrix(gen, 3, 2));
        tiny.response = random_vector(gen, 3);
        CHECK_THROWS_AS(static_cast<void>(fit_reml(tiny)), InvalidInput);
    }
}
