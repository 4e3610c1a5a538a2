#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "seatvc/errors.hpp"

namespace seatvc::mixed {

/**
 * @brief Penalized least-squares problem in mixed-model form.
 *
 * The model is y = X b + sum_b Z_b u_b + e with a ridge penalty lambda_b on
 * each random block's coefficients. Treating u_b ~ N(0, sigma_b^2 I) and
 * e ~ N(0, sigma_e^2 I) makes lambda_b = sigma_e^2 / sigma_b^2, so penalty
 * strength can be chosen by restricted maximum likelihood.
 */
struct PenalizedDesign {
    Eigen::MatrixXd fixed;                       ///< n x p, unpenalized columns
    std::vector<Eigen::MatrixXd> random_blocks;  ///< each n x H_b, ridge-penalized per block
    Eigen::VectorXd response;                    ///< length n

    Eigen::Index rows() const { return fixed.rows(); }
    Eigen::Index fixed_cols() const { return fixed.cols(); }
    Eigen::Index random_cols() const;

    /// Dimension checks plus a rank check on the fixed block.
    void validate() const;
};

struct FitStatistics {
    double neg2_res_log_likelihood = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int effective_param_count = 0;  ///< fixed-effect columns + variance components
};

/// aic = -2ResLL + 2*p_eff, bic = -2ResLL + p_eff*ln(n).
FitStatistics fit_metrics(double neg2_res_log_likelihood, int effective_param_count, Eigen::Index n);

struct PenalizedSolution {
    Eigen::VectorXd fixed_coefficients;
    std::vector<Eigen::VectorXd> random_coefficients;
    Eigen::VectorXd fitted;     ///< X b + sum Z_b u_b
    Eigen::VectorXd residuals;  ///< y - fitted
};

/// Minimize ||y - Xb - sum Z_b u_b||^2 + sum lambda_b ||u_b||^2 via the
/// augmented normal equations. Lambdas must be finite and positive, one per
/// block. Throws NumericalError naming the offending block if the augmented
/// system is singular.
PenalizedSolution fit_penalized_fixed_lambda(const PenalizedDesign& design,
                                             const std::vector<double>& lambdas);

struct RemlOptions {
    double log10_lambda_min = -8.0;
    double log10_lambda_max = 12.0;
    double rel_tolerance = 1e-9;     ///< relative change of -2ResLL between accepted iterations
    int max_iterations = 200;
    double initial_log10_lambda = 0.0;
};

struct FittedMixedModel {
    Eigen::VectorXd fixed_coefficients;
    std::vector<Eigen::VectorXd> random_coefficients;
    std::vector<double> lambdas;           ///< optimal tuning parameter per block
    std::vector<double> block_variances;   ///< sigma_b^2 = sigma_e^2 / lambda_b
    double residual_variance = 0.0;        ///< sigma_e^2
    FitStatistics stats;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;

    /// sigma_e^2 * C^{-1} with C the augmented cross-product matrix at the
    /// optimum; pointwise standard errors are conditional on the estimated
    /// lambdas. Column order: fixed coefficients, then blocks in order.
    Eigen::MatrixXd coefficient_covariance;

    std::vector<bool> boundary_flags;      ///< sigma_b^2 floored (lambda at its upper bound)
    bool near_zero_residual = false;       ///< residual variance at its numerical floor
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    std::vector<double> objective_history; ///< -2ResLL at accepted iterations, non-increasing
};

/**
 * @brief Fit by restricted maximum likelihood over the per-block variance
 * ratios.
 *
 * The REML criterion is profiled over the residual variance; what remains is
 * minimized over theta_b = ln(lambda_b) with a box-constrained quasi-Newton
 * method (BFGS with projection and backtracking), falling back to
 * golden-section sweeps along coordinates whenever a descent step fails.
 * Boundary estimates (sigma_b^2 at its floor) are flagged, not errors.
 * Non-convergence after max_iterations throws NumericalError reporting the
 * final gradient norm.
 */
FittedMixedModel fit_reml(const PenalizedDesign& design, const RemlOptions& options = {});

/// -2ResLL at fixed lambdas (profiled over residual variance); the quantity
/// fit_reml minimizes, exposed for profile-likelihood diagnostics.
double reml_neg2_log_likelihood(const PenalizedDesign& design, const std::vector<double>& lambdas);

/// Full model assembly (coefficients, covariance, statistics, flags) at
/// caller-chosen lambdas, skipping the REML search.
FittedMixedModel fit_at_fixed_lambdas(const PenalizedDesign& design,
                                      const std::vector<double>& lambdas);

}  // namespace seatvc::mixed
