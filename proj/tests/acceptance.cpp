// Acceptance gate: one self-contained check per release criterion, each
// printed as a PASS/FAIL line. Derived quantities are verified against
// independent oracles implemented here (stacked-QR ridge solve, dense-V
// restricted-likelihood profile, grid truths), never against the library's
// own internals.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seatvc/cli.hpp"
#include "seatvc/csv.hpp"
#include "seatvc/mixed_model.hpp"
#include "seatvc/sea_model.hpp"
#include "seatvc/simulator.hpp"
#include "seatvc/spline_basis.hpp"
#include "seatvc/tvc.hpp"

namespace fs = std::filesystem;
using namespace seatvc;

namespace {

int g_checks_failed = 0;

void expect(bool ok, const char* what) {
    if (!ok) {
        ++g_checks_failed;
        std::printf("      subcheck failed: %s\n", what);
    }
}

std::vector<double> linspace(int points) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = double(i) / (points - 1);
    return g;
}

double rmise(const std::vector<double>& est, const std::function<double(double)>& truth,
             const std::vector<double>& grid) {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double d = est[i] - truth(grid[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(grid.size()));
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("seatvc_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// --- criterion 1: basis values against a hand-computed fixture table -------

bool criterion_basis_exactness() {
    struct Fixture {
        double t, knot;
        int q;
        double expected;
    };
    // Dyadic inputs, so (t - knot)^q is exact in binary floating point.
    const Fixture table[] = {
        {0.5, 0.25, 0, 1.0},       {0.25, 0.5, 0, 0.0},
        {0.5, 0.5, 0, 0.0},        {0.75, 0.5, 0, 1.0},
        {1.0, 0.75, 0, 1.0},       {0.75, 0.5, 1, 0.25},
        {0.5, 0.75, 1, 0.0},       {1.0, 0.25, 1, 0.75},
        {0.625, 0.5, 1, 0.125},    {1.0, 0.5, 1, 0.5},
        {0.75, 0.25, 2, 0.25},     {1.0, 0.5, 2, 0.25},
        {0.625, 0.5, 2, 0.015625}, {0.25, 0.75, 2, 0.0},
        {1.0, 0.25, 2, 0.5625},    {0.5, 0.25, 2, 0.0625},
        {0.75, 0.25, 3, 0.125},    {1.0, 0.5, 3, 0.125},
        {0.75, 0.5, 3, 0.015625},  {0.5, 0.5, 3, 0.0},
        {1.0, 0.75, 3, 0.015625},  {1.0, 0.25, 3, 0.421875},
        {0.625, 0.25, 3, 0.052734375},
    };
    for (const Fixture& f : table)
        expect(spline::truncated_power(f.t, f.knot, f.q) == f.expected,
               "truncated power != hand value");

    spline::BasisSpec quad{2, {0.25, 0.5}, 0.0, 1.0};
    Eigen::VectorXd row = spline::basis_row(0.75, quad);
    const double quad_expected[] = {1.0, 0.75, 0.5625, 0.25, 0.0625};
    for (int i = 0; i < 5; ++i) expect(row[i] == quad_expected[i], "quadratic basis row");

    spline::BasisSpec cubic{3, {0.5}, 0.0, 1.0};
    row = spline::basis_row(1.0, cubic);
    const double cubic_expected[] = {1.0, 1.0, 1.0, 1.0, 0.125};
    for (int i = 0; i < 5; ++i) expect(row[i] == cubic_expected[i], "cubic basis row");
    return g_checks_failed == 0;
}

// --- criterion 2: penalized solve against a stacked-QR ridge oracle --------

bool criterion_ridge_oracle() {
    std::mt19937_64 rng(20240201);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> n_dist(20, 50), pf_dist(1, 4), h_dist(1, 5),
        blocks_dist(1, 2);
    std::uniform_real_distribution<double> loglam(-3.0, 3.0);

    for (int s = 0; s < 50; ++s) {
        const Eigen::Index n = n_dist(rng);
        const Eigen::Index pf = pf_dist(rng);
        const int n_blocks = blocks_dist(rng);

        mixed::PenalizedDesign d;
        d.fixed = Eigen::MatrixXd::NullaryExpr(n, pf, [&](Eigen::Index, Eigen::Index) {
            return gauss(rng);
        });
        d.fixed.col(0).setOnes();
        std::vector<double> lambdas;
        Eigen::Index total_random = 0;
        for (int b = 0; b < n_blocks; ++b) {
            const Eigen::Index h = h_dist(rng);
            d.random_blocks.push_back(Eigen::MatrixXd::NullaryExpr(
                n, h, [&](Eigen::Index, Eigen::Index) { return gauss(rng); }));
            lambdas.push_back(std::pow(10.0, loglam(rng)));
            total_random += h;
        }
        d.response = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return gauss(rng); });

        // Oracle: least squares on [A; sqrt(lambda) selector] stacked rows.
        const Eigen::Index p = pf + total_random;
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + total_random, p);
        aug.block(0, 0, n, pf) = d.fixed;
        Eigen::Index col = pf, row = n;
        for (int b = 0; b < n_blocks; ++b) {
            const Eigen::Index h = d.random_blocks[static_cast<std::size_t>(b)].cols();
            aug.block(0, col, n, h) = d.random_blocks[static_cast<std::size_t>(b)];
            aug.block(row, col, h, h) =
                std::sqrt(lambdas[static_cast<std::size_t>(b)]) *
                Eigen::MatrixXd::Identity(h, h);
            col += h;
            row += h;
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + total_random);
        rhs.head(n) = d.response;
        Eigen::VectorXd oracle = aug.colPivHouseholderQr().solve(rhs);

        mixed::PenalizedSolution sol = mixed::fit_penalized_fixed_lambda(d, lambdas);
        Eigen::VectorXd stacked(p);
        stacked.head(pf) = sol.fixed_coefficients;
        col = pf;
        for (const Eigen::VectorXd& u : sol.random_coefficients) {
            stacked.segment(col, u.size()) = u;
            col += u.size();
        }
        const double rel = (stacked - oracle).norm() / std::max(1.0, oracle.norm());
        expect(rel <= 1e-8, "penalized solve differs from stacked-QR oracle");
    }
    return g_checks_failed == 0;
}

// --- criterion 3: REML optimum against a dense-V profile-likelihood grid ---

/// Independent evaluation of the restricted likelihood at one lambda:
/// V0 = I + Z Z^T / lambda, profiled over the residual variance.
double dense_reml_criterion(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                            const Eigen::VectorXd& y, double lambda) {
    const Eigen::Index n = X.rows(), p = X.cols();
    Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(n, n) + (Z * Z.transpose()) / lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(v0);
    Eigen::MatrixXd v0inv_x = llt.solve(X);
    Eigen::VectorXd v0inv_y = llt.solve(y);
    Eigen::MatrixXd m = X.transpose() * v0inv_x;
    Eigen::VectorXd beta = m.ldlt().solve(X.transpose() * v0inv_y);
    Eigen::VectorXd r = y - X * beta;
    const double s2 = r.dot(llt.solve(r)) / static_cast<double>(n - p);
    double logdet_v0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet_v0 += 2.0 * std::log(llt.matrixL()(i, i));
    const double logdet_m = std::log(m.ldlt().vectorD().array().abs().prod());
    const double nm_p = static_cast<double>(n - p);
    return nm_p * (1.0 + std::log(2.0 * M_PI)) + nm_p * std::log(s2) + logdet_v0 + logdet_m;
}

bool criterion_reml_vs_grid() {
    std::mt19937_64 rng(555);
    std::normal_distribution<double> gauss;
    const int grid_n = 200;
    const double lo = -8.0 * std::log(10.0), hi = 12.0 * std::log(10.0);
    const double cell = (hi - lo) / (grid_n - 1);

    for (int prob = 0; prob < 10; ++prob) {
        const int n = 120 + 20 * (prob % 4);
        const int q = 2 + prob % 2;
        const double amplitude = 0.5 + 0.5 * (prob % 3);
        const double noise = 0.15 + 0.05 * (prob % 3);

        std::vector<double> times(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = double(i) / (n - 1);
        // Two full sine periods: the polynomial block alone cannot track the
        // curve, so the penalty level is genuinely identified.
        spline::BasisSpec basis{q, spline::place_knots(times, 12), 0.0, 1.0};

        Eigen::MatrixXd X(n, q + 1), Z(n, basis.knot_count());
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd row_i = spline::basis_row(times[static_cast<std::size_t>(i)], basis);
            X.row(i) = row_i.head(q + 1);
            Z.row(i) = row_i.tail(basis.knot_count());
            const double t = times[static_cast<std::size_t>(i)];
            y[i] = amplitude * std::sin(4.0 * M_PI * t) + 0.3 * t + noise * gauss(rng);
        }

        mixed::PenalizedDesign d{X, {Z}, y};
        mixed::FittedMixedModel fit = mixed::fit_reml(d);
        const double ln_hat = std::log(fit.lambdas[0]);

        int best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (int i = 0; i < grid_n; ++i) {
            const double val = dense_reml_criterion(X, Z, y, std::exp(lo + cell * i));
            if (val < best_val) {
                best_val = val;
                best = i;
            }
        }
        const double ln_grid = lo + cell * best;
        expect(std::abs(ln_hat - ln_grid) <= cell + 1e-12,
               "REML optimum not within one grid cell of the dense-V argmax");
    }
    return g_checks_failed == 0;
}

// --- criterion 4: trajectory recovery on simulated panels -------------------

bool criterion_trajectory_recovery() {
    sim::TvcPanelConfig cfg;
    cfg.n_subjects = 200;
    cfg.obs_per_subject = 60;
    cfg.seed = 2024;
    cfg.noise_sd = 0.1;
    cfg.truths["intercept"] = sim::TruthFunction::constant(0.7);
    cfg.truths["x_wiggle"] = sim::TruthFunction::sinusoid(1.0, 1.0, 0.0);
    cfg.truths["x_trend"] = sim::TruthFunction::polynomial({0.2, 0.4});
    panel::ModelPanel data = sim::simulate_tvc_panel(cfg);

    tvc::TvcSpec spec;
    spec.basis = tvc::resolve_basis(data, 3, 20);
    spec.tvc_covariates = {"x_wiggle", "x_trend"};
    tvc::FittedTvcModel fit = tvc::fit(data, spec);

    std::vector<double> grid = linspace(101);
    auto check = [&](const char* name, std::function<double(double)> truth) {
        tvc::Trajectory tr = tvc::eval_coefficient(fit, name, grid);
        expect(rmise(tr.estimate, truth, grid) <= 0.1, "trajectory RMISE exceeds 0.1");
    };
    check(tvc::kInterceptName, [](double) { return 0.7; });
    check("x_wiggle", [](double t) { return std::sin(2.0 * M_PI * t); });
    check("x_trend", [](double t) { return 0.2 + 0.4 * t; });
    return g_checks_failed == 0;
}

// --- criterion 5: flat truths stay flat; the degenerate family is OLS ------

bool criterion_flat_truth_parsimony() {
    sim::TvcPanelConfig cfg;
    cfg.n_subjects = 150;
    cfg.obs_per_subject = 40;
    cfg.seed = 515;
    cfg.noise_sd = 0.1;
    cfg.truths["intercept"] = sim::TruthFunction::constant(0.7);
    cfg.truths["x1"] = sim::TruthFunction::constant(0.3);
    cfg.truths["x2"] = sim::TruthFunction::constant(-0.5);
    panel::ModelPanel data = sim::simulate_tvc_panel(cfg);

    tvc::TvcSpec spec;
    spec.basis = tvc::resolve_basis(data, 3, 20);
    spec.tvc_covariates = {"x1", "x2"};
    tvc::FittedTvcModel fit = tvc::fit(data, spec);

    std::vector<double> grid = linspace(101);
    for (const char* name : {tvc::kInterceptName, "x1", "x2"}) {
        tvc::Trajectory tr = tvc::eval_coefficient(fit, name, grid);
        const auto [mn, mx] = std::minmax_element(tr.estimate.begin(), tr.estimate.end());
        expect(*mx - *mn <= 0.05, "flat-truth trajectory range exceeds 0.05");
    }

    // Degenerate family (no trend, no knots) must equal plain OLS.
    tvc::TvcSpec flat;
    flat.basis = tvc::resolve_basis(data, 0, 0);
    flat.tvc_covariates = {"x1", "x2"};
    tvc::FittedTvcModel inv = tvc::fit(data, flat);

    Eigen::MatrixXd a(data.rows(), 3);
    a.col(0).setOnes();
    a.col(1) = data.covariates.col(data.column_of("x1"));
    a.col(2) = data.covariates.col(data.column_of("x2"));
    Eigen::VectorXd ols = a.colPivHouseholderQr().solve(data.response);

    const double single[] = {0.5};
    const char* names[] = {tvc::kInterceptName, "x1", "x2"};
    for (int i = 0; i < 3; ++i) {
        tvc::Trajectory tr = tvc::eval_coefficient(inv, names[i], std::span(single));
        expect(std::abs(tr.estimate[0] - ols[i]) <= 1e-8, "degenerate family differs from OLS");
    }
    return g_checks_failed == 0;
}

// --- criterion 6: information criteria order the trend families ------------

bool criterion_spec_ordering() {
    int good = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        sim::TvcPanelConfig cfg;
        cfg.n_subjects = 100;
        cfg.obs_per_subject = 50;
        cfg.seed = 6000 + seed;
        cfg.noise_sd = 0.1;
        cfg.truths["intercept"] = sim::TruthFunction::sinusoid(0.8, 1.0, 0.3);
        cfg.truths["x"] = sim::TruthFunction::sinusoid(1.0, 1.0, 0.0);
        panel::ModelPanel data = sim::simulate_tvc_panel(cfg);

        double aic[4] = {0, 0, 0, 0};
        const int orders[4] = {0, 1, 2, 3};
        for (int f = 0; f < 4; ++f) {
            tvc::TvcSpec spec;
            spec.basis = tvc::resolve_basis(data, orders[f], orders[f] == 0 ? 0 : 8);
            spec.tvc_covariates = {"x"};
            aic[f] = tvc::fit(data, spec).stats.aic;
        }
        if (aic[3] < aic[2] && aic[2] < aic[1] && aic[1] < aic[0]) ++good;
    }
    std::printf("      AIC ordering cubic<quadratic<linear<invariant held in %d/10 seeds\n",
                good);
    expect(good >= 9, "AIC ordering held in fewer than 9 of 10 replications");
    return g_checks_failed == 0;
}

// --- criterion 7: accounting-identity spend recovers unit coefficients -----

bool criterion_stage1_identity() {
    sim::SimConfig cfg = sim::SimConfig::defaults();
    cfg.seed = 777;
    cfg.n_ads = 25;
    cfg.horizon_days = 30;
    cfg.budget_shock_sd = 0.0;
    sea::PreparedPanel prepared = sea::prepare_panel(sim::generate(cfg).records);

    sea::Stage1Fit s1 = sea::stage1_budget(prepared.data,
                                           tvc::resolve_basis(prepared.data, 3, 8));
    std::vector<double> grid = linspace(41);
    for (const char* name : {sea::kLnDemand, sea::kLnCtr, sea::kLnCpc}) {
        tvc::Trajectory tr =
            tvc::eval_coefficient(s1.model, name, grid, tvc::Scale::Original);
        for (double v : tr.estimate)
            expect(std::abs(v - 1.0) <= 1e-6, "stage-1 coefficient not within 1e-6 of 1");
    }
    return g_checks_failed == 0;
}

// --- criterion 8: the control function removes the endogeneity bias --------

bool criterion_endogeneity_correction() {
    const double true_beta_star = 0.4 * 0.3;  // eta * beta at the default truths
    const std::vector<double> grid = linspace(21);
    double sum_corrected = 0.0, sum_uncorrected = 0.0;
    int wins = 0;
    const int reps = 100;

    for (int rep = 0; rep < reps; ++rep) {
        sim::SimConfig cfg = sim::SimConfig::defaults();
        cfg.seed = 9000 + static_cast<std::uint64_t>(rep);
        cfg.n_ads = 80;
        cfg.horizon_days = 30;
        cfg.noise_sd = 0.25;
        cfg.budget_shock_sd = 0.6;
        cfg.endogeneity_rho = 0.6;
        sea::PreparedPanel prepared = sea::prepare_panel(sim::generate(cfg).records);
        spline::BasisSpec basis = tvc::resolve_basis(prepared.data, 1, 4);

        sea::Stage1Fit s1 = sea::stage1_budget(prepared.data, basis);
        sea::Stage2Fit corrected = sea::stage2_response(prepared.data, s1.residuals, basis);
        sea::Stage2Options no_correction;
        no_correction.include_correction = false;
        sea::Stage2Fit uncorrected =
            sea::stage2_response(prepared.data, Eigen::VectorXd(), basis, no_correction);

        auto mean_beta_star = [&](const sea::Stage2Fit& fit) {
            sea::ReducedTrajectories r = sea::eval_reduced(fit, grid);
            double acc = 0.0;
            for (double v : r.beta_star) acc += v;
            return acc / static_cast<double>(r.beta_star.size());
        };
        const double bias_c = mean_beta_star(corrected) - true_beta_star;
        const double bias_u = mean_beta_star(uncorrected) - true_beta_star;
        sum_corrected += bias_c;
        sum_uncorrected += bias_u;
        if (std::abs(bias_c) < std::abs(bias_u)) ++wins;
    }
    const double mean_c = sum_corrected / reps, mean_u = sum_uncorrected / reps;
    std::printf("      mean bias corrected %+0.4f vs uncorrected %+0.4f; corrected won %d/%d\n",
                mean_c, mean_u, wins, reps);
    expect(std::abs(mean_c) < std::abs(mean_u),
           "corrected mean bias not smaller than uncorrected");
    expect(wins >= 90, "corrected estimator won fewer than 90 of 100 replications");
    expect(mean_u > 0.0, "uncorrected bias not upward");
    return g_checks_failed == 0;
}

// --- criterion 9: structural identities round-trip through the mapping -----

bool criterion_structural_roundtrip() {
    std::vector<double> grid = linspace(41);
    const std::size_t g = grid.size();
    sea::StructuralTrajectories s;
    s.t = grid;
    s.mask_reasons.assign(g, "");
    s.alpha1 = 0.7;
    for (double t : grid) {
        s.eta.push_back(0.5 + 0.4 * std::sin(2.0 * M_PI * t));  // stays in [0.1, 0.9]
        s.carryover.push_back(1.0 - s.eta.back());
        s.alpha0.push_back(3.0 + t);
        s.beta.push_back(0.2 + 0.3 * t);
        s.tau_ctr.push_back(0.5 - 0.2 * t);
        s.tau_klength.push_back(-0.1 + 0.05 * t);
        s.tau_retailer.push_back(0.3 * std::cos(2.0 * M_PI * t));
        s.tau_brand.push_back(0.2);
        s.tau_holiday.push_back(0.4 - 0.1 * t);
        s.lambda_position.push_back(-0.05 - 0.02 * t);
        s.lambda_cvr.push_back(0.3 + 0.1 * t);
    }

    sea::StructuralTrajectories back =
        sea::recover_from_reduced(sea::forward_map(s), 0.02, 1e-6);
    auto close = [&](const std::vector<double>& a, const std::vector<double>& b,
                     const char* what) {
        for (std::size_t i = 0; i < g; ++i)
            expect(std::abs(a[i] - b[i]) <= 1e-10, what);
    };
    close(back.eta, s.eta, "eta roundtrip");
    close(back.carryover, s.carryover, "carryover roundtrip");
    close(back.alpha0, s.alpha0, "alpha0 roundtrip");
    close(back.beta, s.beta, "beta roundtrip");
    close(back.tau_ctr, s.tau_ctr, "tau_ctr roundtrip");
    close(back.tau_klength, s.tau_klength, "tau_klength roundtrip");
    close(back.tau_retailer, s.tau_retailer, "tau_retailer roundtrip");
    close(back.tau_brand, s.tau_brand, "tau_brand roundtrip");
    close(back.tau_holiday, s.tau_holiday, "tau_holiday roundtrip");
    close(back.lambda_position, s.lambda_position, "lambda_position roundtrip");
    close(back.lambda_cvr, s.lambda_cvr, "lambda_cvr roundtrip");
    expect(back.alpha1 == s.alpha1, "alpha1 passthrough");
    for (const std::string& reason : back.mask_reasons)
        expect(reason.empty(), "mask fired inside the clean eta range");

    // Masking must fire exactly at |eta| <= floor. Dyadic etas recover
    // exactly, so the comparison against the floor is sharp.
    const double floor_value = 0.25;
    const double etas[] = {0.125, 0.1875, 0.25, 0.3125, 0.5, 0.75};
    sea::StructuralTrajectories m;
    m.alpha1 = 0.0;
    for (double e : etas) {
        m.t.push_back(0.5);
        m.eta.push_back(e);
        m.carryover.push_back(1.0 - e);
        m.alpha0.push_back(2.0);
        m.beta.push_back(0.3);
        m.tau_ctr.push_back(0.5);
        m.tau_klength.push_back(-0.1);
        m.tau_retailer.push_back(0.3);
        m.tau_brand.push_back(0.2);
        m.tau_holiday.push_back(0.4);
        m.lambda_position.push_back(-0.05);
        m.lambda_cvr.push_back(0.3);
        m.mask_reasons.emplace_back();
    }
    sea::StructuralTrajectories masked =
        sea::recover_from_reduced(sea::forward_map(m), floor_value, 1e-6);
    for (std::size_t i = 0; i < std::size(etas); ++i) {
        const bool should_mask = std::abs(etas[i]) <= floor_value;
        expect((masked.mask_reasons[i] == "eta at floor") == should_mask,
               "mask does not trigger exactly at |eta| <= floor");
        expect(std::isnan(masked.beta[i]) == should_mask, "beta masking mismatch");
    }
    return g_checks_failed == 0;
}

// --- criterion 10: reruns are byte-identical; row order is irrelevant ------

bool criterion_determinism() {
    fs::path dir = fresh_dir("determinism");

    cli::RunConfig sim_cfg;
    sim_cfg.command = "simulate";
    sim::SimConfig sc = sim::SimConfig::defaults();
    sc.seed = 606;
    sc.n_ads = 20;
    sc.horizon_days = 25;
    sc.missing_rate = 0.1;
    sim_cfg.simulate = sc;
    cli::cmd_simulate(sim_cfg, (dir / "sim_a").string());
    cli::RunConfig sim_echo =
        cli::run_config_from_json(slurp(dir / "sim_a" / "run_config.json"));
    cli::cmd_simulate(sim_echo, (dir / "sim_b").string());
    for (const char* name : {"dataset.csv", "ground_truth.json", "run_config.json"})
        expect(slurp(dir / "sim_a" / name) == slurp(dir / "sim_b" / name),
               "simulate rerun not byte-identical");

    cli::RunConfig fit_cfg;
    fit_cfg.command = "fit";
    fit_cfg.input = (dir / "sim_a" / "dataset.csv").string();
    fit_cfg.spec = {"MODEL-Time-Varying-linear", 1, 4};
    fit_cfg.grid_points = 21;
    cli::cmd_fit(fit_cfg, (dir / "fit_a").string());
    cli::RunConfig fit_echo =
        cli::run_config_from_json(slurp(dir / "fit_a" / "run_config.json"));
    cli::cmd_fit(fit_echo, (dir / "fit_b").string());
    for (const char* name : {"model.json", "stage1_model.json", "report.json",
                             "trajectories_reduced.csv", "trajectories_structural.csv"})
        expect(slurp(dir / "fit_a" / name) == slurp(dir / "fit_b" / name),
               "fit rerun not byte-identical");

    // Row-order invariance of the estimates themselves.
    std::vector<RawAdDay> records =
        csv::read_raw_csv_file((dir / "sim_a" / "dataset.csv").string());
    std::vector<RawAdDay> shuffled = records;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(99));

    auto fit_pipeline = [](std::vector<RawAdDay> rows) {
        sea::PreparedPanel prepared = sea::prepare_panel(std::move(rows));
        spline::BasisSpec basis = tvc::resolve_basis(prepared.data, 1, 4);
        sea::Stage1Fit s1 = sea::stage1_budget(prepared.data, basis);
        return sea::stage2_response(prepared.data, s1.residuals, basis);
    };
    Eigen::VectorXd a = fit_pipeline(records).model.coefficients;
    Eigen::VectorXd b = fit_pipeline(shuffled).model.coefficients;
    expect(a.size() == b.size(), "permuted fit has different coefficient count");
    expect((a - b).cwiseAbs().maxCoeff() <= 1e-10,
           "row permutation moved an estimate by more than 1e-10");

    fs::remove_all(dir);
    return g_checks_failed == 0;
}

}  // namespace

int main() {
    struct Criterion {
        const char* label;
        double budget_seconds;
        bool (*fn)();
    };
    const Criterion criteria[] = {
        {"truncated-power basis matches hand-computed values exactly", 1.0,
         criterion_basis_exactness},
        {"penalized solve matches the stacked-QR ridge oracle (50 systems, 1e-8)", 10.0,
         criterion_ridge_oracle},
        {"REML optimum lands within one cell of a 200-point dense-V grid (10 problems)", 60.0,
         criterion_reml_vs_grid},
        {"cubic fit recovers constant/sinusoid/linear trajectories with RMISE <= 0.1", 300.0,
         criterion_trajectory_recovery},
        {"flat truths fit flat (range <= 0.05) and the degenerate family equals OLS", 300.0,
         criterion_flat_truth_parsimony},
        {"AIC orders cubic < quadratic < linear < invariant in >= 9/10 seeds", 300.0,
         criterion_spec_ordering},
        {"accounting-identity spend yields stage-1 coefficients within 1e-6 of 1", 60.0,
         criterion_stage1_identity},
        {"control function shrinks the endogeneity bias and wins >= 90/100 runs", 1800.0,
         criterion_endogeneity_correction},
        {"structural identities round-trip to 1e-10 with exact floor masking", 10.0,
         criterion_structural_roundtrip},
        {"reruns are byte-identical and row permutations move nothing past 1e-10", 120.0,
         criterion_determinism},
    };

    int passed = 0;
    const int total = static_cast<int>(std::size(criteria));
    for (int i = 0; i < total; ++i) {
        g_checks_failed = 0;
        bool ok = false;
        std::string note;
        const auto start = std::chrono::steady_clock::now();
        try {
            ok = criteria[i].fn();
        } catch (const std::exception& e) {
            note = std::string(" [exception: ") + e.what() + "]";
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criteria[i].budget_seconds) {
            ok = false;
            note += " [over time budget]";
        }
        std::printf("%s  criterion %2d: %s (%.2fs)%s\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].label, elapsed, note.c_str());
        std::fflush(stdout);
        passed += ok ? 1 : 0;
    }
    std::printf("acceptance: %d/%d criteria passed\n", passed, total);
    return passed == total ? 0 : 1;
}
