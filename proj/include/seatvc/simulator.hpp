#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seatvc/errors.hpp"
#include "seatvc/panel.hpp"
#include "seatvc/records.hpp"

namespace seatvc::sim {

/**
 * @brief A known coefficient function of normalized time, used as simulation
 * ground truth.
 *
 * Shapes: constant; polynomial (ascending coefficients, c0 + c1 t + ...);
 * sinusoid amplitude*sin(2*pi*frequency*t + phase); natural cubic spline
 * through control points (clamped to the control range outside it).
 */
class TruthFunction {
  public:
    enum class Kind { Constant, Polynomial, Sinusoid, Spline };

    TruthFunction() = default;

    static TruthFunction constant(double value);
    static TruthFunction polynomial(std::vector<double> ascending_coefficients);
    static TruthFunction sinusoid(double amplitude, double frequency, double phase);
    static TruthFunction spline(std::vector<std::pair<double, double>> control_points);

    double eval(double t) const;
    Kind kind() const { return kind_; }

    // Serialization accessors.
    double constant_value() const { return constant_; }
    const std::vector<double>& coefficients() const { return coefficients_; }
    double amplitude() const { return amplitude_; }
    double frequency() const { return frequency_; }
    double phase() const { return phase_; }
    const std::vector<std::pair<double, double>>& control_points() const { return points_; }

  private:
    Kind kind_ = Kind::Constant;
    double constant_ = 0.0;
    std::vector<double> coefficients_;
    double amplitude_ = 0.0, frequency_ = 0.0, phase_ = 0.0;
    std::vector<std::pair<double, double>> points_;
    std::vector<double> second_derivs_;  ///< natural spline curvature at the control points
};

/// Distribution parameters for the synthetic PPC covariates.
struct CovariateModel {
    double demand_log_mean = 7.6009024595420822;  ///< ln(2000)
    double demand_log_sd = 0.5;
    double ctr_log_mean = -2.3025850929940455;    ///< ln(0.10)
    double ctr_log_sd = 0.3;
    double cvr_log_mean = -1.6094379124341003;    ///< ln(0.20)
    double cvr_log_sd = 0.3;
    double cpc_log_mean = 0.4054651081081644;     ///< ln(1.5)
    double cpc_log_sd = 0.3;
    int position_max = 8;       ///< positions drawn uniformly from 1..position_max
    double brand_prob = 0.25;
    double retailer_prob = 0.35;
    double holiday_prob = 0.15;
    double klength_prob = 0.35; ///< klength = 1 + Binomial(5, klength_prob)
};

/// Names of the structural coefficient functions a SimConfig must define.
std::span<const std::string> structural_truth_names();

/**
 * @brief Full synthetic-campaign configuration.
 *
 * The response follows the partial-adjustment recursion: with eta(t) the
 * adjustment speed, ln-sales move a fraction eta toward the target
 *   alpha0 + beta*(ln spend + tau_ctr*ln CTR + tau_klength*KLength
 *   + tau_retailer*Retailer + tau_brand*Brand + tau_holiday*Holiday)
 *   + lambda_position*Position + lambda_cvr*ln CVR
 * each day, plus noise. Budget shocks enter through impressions (so spend
 * deviates from its demand-driven level) and are correlated with the response
 * noise at endogeneity_rho; the direct CPC effect is held at zero.
 */
struct SimConfig {
    int n_ads = 50;
    int horizon_days = 60;
    std::uint64_t seed = 1;
    double noise_sd = 0.2;           ///< response error sd
    double budget_shock_sd = 0.4;    ///< sd of the log budget shock
    double endogeneity_rho = 0.0;    ///< corr(budget shock, response error)
    double missing_rate = 0.0;       ///< per ad-day probability of no record
    CovariateModel covariates;
    std::map<std::string, TruthFunction> truths;  ///< keyed by structural_truth_names()

    /// Config with every structural truth set to a stable default.
    static SimConfig defaults();

    /// Throws InvalidInput on missing truths, eta outside (0,1), bad rho, etc.
    void validate() const;
};

/// Everything the estimator is not allowed to see: the configured truths plus
/// per-record latent ln-sales (pre-rounding) and the two shock series.
struct GroundTruth {
    std::map<std::string, TruthFunction> structural;
    double noise_sd = 0.0;
    double budget_shock_sd = 0.0;
    double endogeneity_rho = 0.0;
    std::vector<double> latent_ln_sales;  ///< aligned with the emitted records
    std::vector<double> response_errors;
    std::vector<double> budget_shocks;
};

struct SimResult {
    std::vector<RawAdDay> records;  ///< sorted by (ad_id, day_index)
    GroundTruth truth;
};

/**
 * @brief Generate a synthetic campaign.
 *
 * Bit-reproducible for a given config: every ad consumes its own RNG
 * substream keyed by (seed, ad_id), so the output is independent of
 * generation order. The recursion consumes the observed covariate values
 * (after integer rounding of counts), keeping the generated data exactly
 * consistent with what the estimation pipeline computes from the records.
 * Throws NumericalError with diagnostics if |ln sales| exceeds 50.
 */
SimResult generate(const SimConfig& config);

/**
 * @brief Evaluate a configured truth on a grid.
 *
 * Accepts structural names ("eta", "carryover", "alpha0", "beta", "tau_ctr",
 * ..., "lambda_cvr") and the reduced-form combinations the regression
 * estimates ("gamma_star" = 1 - eta, "alpha0_star" = eta*alpha0, "beta_star"
 * = eta*beta, "tau_ctr_star" = eta*beta*tau_ctr, ..., "lambda_cvr_star" =
 * eta*lambda_cvr). Throws InvalidInput for unknown names.
 */
std::vector<double> ground_truth_eval(const GroundTruth& truth, const std::string& name,
                                      std::span<const double> grid);

std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const std::string& json_text);

std::string sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const std::string& json_text);

/// Plain regression panel with known coefficient functions, for estimator
/// checks that do not need the PPC accounting layer: covariates are iid
/// standard normal, times evenly spaced per subject, response
/// y = sum_k beta_k(t) x_k + intercept(t) + noise.
struct TvcPanelConfig {
    int n_subjects = 100;
    int obs_per_subject = 50;
    std::uint64_t seed = 1;
    double noise_sd = 0.1;
    std::map<std::string, TruthFunction> truths;  ///< "intercept" plus covariate names
};

panel::ModelPanel simulate_tvc_panel(const TvcPanelConfig& config);

}  // namespace seatvc::sim
