#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seatvc/panel.hpp"
#include "seatvc/records.hpp"
#include "seatvc/spline_basis.hpp"
#include "seatvc/tvc.hpp"

namespace seatvc::sea {

/// Panel column names produced by prepare_panel. The response is ln(sales+offset).
inline constexpr const char* kLnSalesLag = "ln_sales_lag";
inline constexpr const char* kLnAdExpenditure = "ln_ad_expenditure";
inline constexpr const char* kLnCtr = "ln_ctr";
inline constexpr const char* kLnCvr = "ln_cvr";
inline constexpr const char* kLnCpc = "ln_cpc";
inline constexpr const char* kLnDemand = "ln_demand";
inline constexpr const char* kKlength = "klength";
inline constexpr const char* kRetailer = "retailer";
inline constexpr const char* kBrand = "brand";
inline constexpr const char* kHoliday = "holiday";
inline constexpr const char* kPosition = "position";
inline constexpr const char* kPositionSq = "position_sq";
inline constexpr const char* kBudgetResidual = "budget_residual";

struct PrepareOptions {
    /// Offset inside ln(sales + offset) and ln(lagged sales + offset); counts
    /// can be zero, ratios cannot, so only the count columns get it.
    double log_offset = 1.0;
    /// Derive CPC as spend/clicks (the feed schema has no CPC column). When
    /// false, the avg_cpc field of the records is trusted instead.
    bool cpc_from_spend = true;
    /// Also emit position squared for the curvature-robustness variant.
    bool position_quadratic = false;
};

/// Why rows were dropped, plus the day range used to normalize time.
struct PrepareReport {
    std::size_t rows_in = 0;
    std::size_t rows_out = 0;
    std::size_t excluded_zero_impressions = 0;
    std::size_t excluded_zero_clicks = 0;
    std::size_t excluded_zero_conversions = 0;
    std::size_t excluded_nonpositive_spend = 0;
    std::size_t excluded_zero_demand = 0;
    std::size_t excluded_first_record = 0;  ///< lag construction drops each ad's first row
    std::size_t ad_count = 0;
    bool has_demand = false;  ///< demand present on every input record
    int day_min = 0;
    int day_max = 0;
};

struct PreparedPanel {
    panel::ModelPanel data;
    PrepareReport report;
};

/**
 * @brief Turn raw ad-day records into the regression panel.
 *
 * Records are sorted by (ad_id, day_index) internally, so input order never
 * matters. Log transforms: ln(sales+offset) response, ln(lag sales+offset),
 * ln spend, ln CTR, ln CVR, ln CPC, and ln demand when every record carries
 * demand. The lag is the previous record's sales within the same ad; rows
 * whose CTR, CVR, CPC, or demand would be undefined are excluded (their sales
 * still feed the next row's lag), and exclusions are counted in the report.
 * Times are day_index normalized to [0,1] over the full input day range.
 *
 * Throws InvalidInput for negative counts, clicks > impressions,
 * conversions > clicks, duplicate (ad_id, day_index), or an empty result.
 */
PreparedPanel prepare_panel(std::vector<RawAdDay> records, const PrepareOptions& options = {});

/// First-stage fit of ln spend on ln demand, ln CTR, and ln CPC with
/// time-varying coefficients and no intercept.
struct Stage1Fit {
    tvc::FittedTvcModel model;
    Eigen::VectorXd residuals;  ///< aligned with the panel rows
    double r2_uncentered = 0.0;
    double residual_sd = 0.0;   ///< sample sd of the residuals
};

/**
 * @brief Budget control-function stage.
 *
 * Spend that follows the pay-per-click accounting identity
 * spend = demand * CTR * CPC makes all three coefficient functions equal 1
 * and the residuals zero; deviations of spend from that level (budget policy)
 * land in the residuals, which the second stage uses as a control covariate.
 * Throws InvalidInput("missing stage-1 regressor: ...") when the panel lacks
 * ln demand.
 */
Stage1Fit stage1_budget(const panel::ModelPanel& data, const spline::BasisSpec& basis);

struct Stage2Options {
    /// Time-varying covariates; empty means the standard response terms
    /// (lagged sales, spend, CTR, keyword length, retailer, brand, holiday,
    /// position, CVR). ln CPC is rejected by a schema check: its effect is
    /// not identified alongside spend and CTR in the accounting identity.
    std::vector<std::string> tvc_covariates;
    bool include_correction = true;  ///< add the stage-1 residual as a constant-coefficient term
    bool position_quadratic = false; ///< also include position_sq when the panel has it
};

struct Stage2Fit {
    tvc::FittedTvcModel model;
    double alpha1 = 0.0;            ///< budget-correction coefficient
    double alpha1_se = 0.0;
    bool correction_used = false;   ///< false when disabled or the residuals were all ~0
};

/**
 * @brief Reduced-form response stage.
 *
 * Fits ln sales on the standard terms with time-varying coefficients plus a
 * time-invariant coefficient on the stage-1 residuals. A residual vector of
 * zero norm is dropped (an all-zero column cannot be estimated); the fit is
 * then identical to omitting the correction. budget_residuals of size zero
 * means no correction; any other size mismatch is an error.
 */
Stage2Fit stage2_response(const panel::ModelPanel& data, const Eigen::VectorXd& budget_residuals,
                          const spline::BasisSpec& basis, const Stage2Options& options = {});

/// Reduced-form coefficient trajectories on a grid, original covariate scale.
struct ReducedTrajectories {
    std::vector<double> t;
    std::vector<double> gamma_star;            ///< lagged-sales coefficient
    std::vector<double> alpha0_star;           ///< intercept
    std::vector<double> beta_star;             ///< ln spend
    std::vector<double> tau_ctr_star;
    std::vector<double> tau_klength_star;
    std::vector<double> tau_retailer_star;
    std::vector<double> tau_brand_star;
    std::vector<double> tau_holiday_star;
    std::vector<double> lambda_position_star;
    std::vector<double> lambda_cvr_star;
    double alpha1_star = 0.0;
};

/**
 * @brief Structural coefficient trajectories.
 *
 * eta is the per-period adjustment speed and carryover = 1 - eta its
 * complement; the two sum to 1 exactly at every grid point. Points where
 * |eta| <= eta_floor leave everything but eta and carryover undefined (NaN)
 * with reason "eta at floor"; where |beta| <= beta_floor the tau trajectories
 * are undefined with reason "beta at floor". mask_reasons holds "" for clean
 * points.
 */
struct StructuralTrajectories {
    std::vector<double> t;
    std::vector<double> eta;
    std::vector<double> carryover;
    std::vector<double> alpha0;
    std::vector<double> beta;
    std::vector<double> tau_ctr;
    std::vector<double> tau_klength;
    std::vector<double> tau_retailer;
    std::vector<double> tau_brand;
    std::vector<double> tau_holiday;
    std::vector<double> lambda_position;
    std::vector<double> lambda_cvr;
    double alpha1 = 0.0;
    std::vector<std::string> mask_reasons;
};

/// Evaluate the fitted reduced-form trajectories on a grid (original scale).
ReducedTrajectories eval_reduced(const Stage2Fit& fit, std::span<const double> grid);

/// Map structural trajectories to the reduced form: gamma* = 1 - eta,
/// alpha0* = eta*alpha0, beta* = eta*beta, tau* = eta*beta*tau,
/// lambda* = eta*lambda. Inverse of recover_from_reduced where defined.
ReducedTrajectories forward_map(const StructuralTrajectories& s);

/// Invert the reduced form pointwise: eta = 1 - gamma*, alpha0 = alpha0*/eta,
/// beta = beta*/eta, tau = tau*/(eta*beta), lambda = lambda*/eta, with
/// masking instead of division blowups.
StructuralTrajectories recover_from_reduced(const ReducedTrajectories& r, double eta_floor = 0.02,
                                            double beta_floor = 1e-6);

/// eval_reduced then recover_from_reduced.
StructuralTrajectories recover_structural(const Stage2Fit& fit, std::span<const double> grid,
                                          double eta_floor = 0.02, double beta_floor = 1e-6);

/// One candidate coefficient-trend family for model comparison.
struct SpecChoice {
    std::string name;
    int order = 3;   ///< polynomial degree of the trend (0 = time-invariant)
    int knots = 30;  ///< interior knots (0 for the time-invariant family)
};

/// The four conventional families: time-invariant, linear, quadratic, cubic.
std::vector<SpecChoice> standard_spec_set(int knots = 30);

struct ComparisonRow {
    SpecChoice spec;
    double neg2_res_ll = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double effective_parameters = 0.0;
    bool converged = false;
    bool best_aic = false;
};

/**
 * @brief Run the full two-stage pipeline once per candidate family and
 * tabulate fit statistics of the response stage.
 *
 * The first stage is refit per family with the same trend. When the panel has
 * no demand column the correction is skipped for every family. Requires at
 * least two specs ("need >=2 specs") so the comparison is meaningful.
 */
std::vector<ComparisonRow> compare_specs(const panel::ModelPanel& data,
                                         std::span<const SpecChoice> specs);

}  // namespace seatvc::sea
