#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seatvc/mixed_model.hpp"
#include "seatvc/panel.hpp"
#include "seatvc/spline_basis.hpp"

namespace seatvc::tvc {

/// Reserved function name for the time-varying intercept.
inline constexpr const char* kInterceptName = "intercept";

/**
 * @brief What to estimate: which covariates get time-varying coefficient
 * functions, which enter with a single time-invariant coefficient, and the
 * shared spline basis for the functions.
 *
 * Every coefficient function uses the same basis; each function's truncated
 * block gets its own penalty so flat truths can flatten while wiggly truths
 * bend. The intercept function is penalized like the slopes.
 */
struct TvcSpec {
    spline::BasisSpec basis;
    std::vector<std::string> tvc_covariates;       ///< K names, each mapped to a coefficient function
    std::vector<std::string> constant_covariates;  ///< time-invariant extra terms
    bool include_intercept = true;

    void validate() const;
};

/// Basis with knots placed at quantiles of the panel's observation times.
spline::BasisSpec resolve_basis(const panel::ModelPanel& data, int order, int interior_knot_count);

/**
 * @brief Column bookkeeping for the stacked coefficient vector.
 *
 * Layout: for each function f in order (intercept first when present), q+1
 * fixed columns x_f * [1, t, ..., t^q]; then all constant covariates; then
 * one random block per function, in function order, of H columns
 * x_f * (t - kappa_h)_+^q. The stacked coefficient vector is
 * [fixed | block_0 | block_1 | ...].
 */
struct DesignLayout {
    std::vector<std::string> function_names;   ///< intercept first when present
    std::vector<std::string> constant_names;
    Eigen::Index fixed_cols = 0;
    Eigen::Index total_cols = 0;
    int order = 0;
    int knot_count = 0;

    Eigen::Index function_count() const { return static_cast<Eigen::Index>(function_names.size()); }
    /// Offset of function f's polynomial columns within the fixed block.
    Eigen::Index fixed_offset(Eigen::Index f) const { return f * (order + 1); }
    /// Column of constant covariate c within the fixed block.
    Eigen::Index constant_column(Eigen::Index c) const {
        return function_count() * (order + 1) + c;
    }
    /// Offset of function f's truncated block within the stacked vector.
    Eigen::Index block_offset(Eigen::Index f) const { return fixed_cols + f * knot_count; }

    Eigen::Index function_index(const std::string& name) const;  ///< -1 when absent
    Eigen::Index constant_index(const std::string& name) const;  ///< -1 when absent
};

/// Assembled regression problem plus its column bookkeeping.
struct TvcDesign {
    mixed::PenalizedDesign design;
    DesignLayout layout;
};

/// Expand the panel into the penalized design. Throws InvalidInput for
/// unknown covariates or times outside the basis domain.
TvcDesign build_design(const panel::ModelPanel& data, const TvcSpec& spec);

struct Trajectory {
    std::vector<double> t;
    std::vector<double> estimate;
    std::vector<double> se;
};

enum class Scale {
    Model,     ///< coefficients as fitted (covariates possibly standardized)
    Original,  ///< coefficients for the covariates' original units
};

enum class Extrapolation { Clamp, Error };

struct FittedTvcModel {
    TvcSpec spec;
    DesignLayout layout;
    Eigen::VectorXd coefficients;        ///< stacked, see DesignLayout
    Eigen::MatrixXd covariance;          ///< of the stacked coefficients, conditional on lambdas
    std::vector<double> lambdas;         ///< one per coefficient function
    std::vector<double> block_variances;
    double residual_variance = 0.0;
    mixed::FitStatistics stats;
    std::map<std::string, panel::ScalingRecord> scaling;  ///< original -> model scale
    std::vector<bool> boundary_flags;    ///< per function
    bool near_zero_residual = false;
    bool converged = false;
    int iterations = 0;
    Eigen::VectorXd fitted;              ///< training rows, model scale
    Eigen::VectorXd residuals;
    std::uint64_t design_hash = 0;       ///< FNV-1a over design and response bytes

    bool has_function(const std::string& name) const;
    bool has_constant(const std::string& name) const;

    /// Names usable with eval_coefficient: functions, then constants.
    std::vector<std::string> coefficient_names() const;
};

/// Fit by REML, one penalty per coefficient function.
FittedTvcModel fit(const panel::ModelPanel& data, const TvcSpec& spec,
                   const mixed::RemlOptions& options = {});

/// Fit at caller-chosen penalties (one per function); used for forced-limit
/// diagnostics. Statistics are evaluated at the given penalties.
FittedTvcModel fit_with_lambdas(const panel::ModelPanel& data, const TvcSpec& spec,
                                const std::vector<double>& lambda_per_function);

/**
 * @brief Coefficient trajectory on a grid with pointwise standard errors.
 *
 * Works for coefficient functions and for time-invariant coefficients (flat
 * trajectory). Scale::Original divides by the covariate's recorded sd; the
 * original-scale intercept additionally absorbs the -mean/sd shifts of every
 * standardized covariate. Standard errors come from the coefficient
 * covariance at the REML optimum, conditional on the estimated penalties.
 */
Trajectory eval_coefficient(const FittedTvcModel& model, const std::string& name,
                            std::span<const double> grid, Scale scale = Scale::Model);

/// Predict responses for new rows given on the covariates' original scale;
/// the model's scaling records are applied internally. Times outside the
/// basis domain are clamped or rejected per policy.
Eigen::VectorXd predict(const FittedTvcModel& model, const panel::ModelPanel& new_rows,
                        Extrapolation policy = Extrapolation::Error);

/// Serialize a fitted model to a JSON string (schema seatvc_model_v1) and back.
std::string save_model(const FittedTvcModel& model);
FittedTvcModel load_model(const std::string& json_text);

}  // namespace seatvc::tvc
