#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seatvc/errors.hpp"

namespace seatvc::panel {

/// Affine map from a covariate's original scale to its stored values:
/// stored = (original - mean) / sd. Identity record is (0, 1).
struct ScalingRecord {
    double mean = 0.0;
    double sd = 1.0;

    /// Record equivalent to applying *this first, then `next`.
    ScalingRecord then(const ScalingRecord& next) const {
        return {mean + sd * next.mean, sd * next.sd};
    }

    double apply(double original) const { return (original - mean) / sd; }
    double invert(double stored) const { return stored * sd + mean; }
};

/**
 * @brief Long-format panel: one row per (subject, time) observation.
 *
 * Times are normalized to [0,1]. Rows for a subject must be contiguous and
 * strictly increasing in time; unbalanced panels (different observation
 * counts per subject) are fine. `scaling` maps covariate name to the
 * transform already applied to its column, so trajectories and predictions
 * can be taken back to the original scale.
 */
struct ModelPanel {
    std::vector<std::string> covariate_names;
    std::vector<std::string> subject_ids;  ///< per row
    std::vector<double> times;             ///< per row, normalized
    Eigen::VectorXd response;
    Eigen::MatrixXd covariates;            ///< rows() x covariate_count()
    std::map<std::string, ScalingRecord> scaling;

    Eigen::Index rows() const { return covariates.rows(); }
    Eigen::Index covariate_count() const { return covariates.cols(); }

    bool has_covariate(const std::string& name) const;

    /// Column index of a named covariate; throws InvalidInput when unknown.
    Eigen::Index column_of(const std::string& name) const;

    /// Scaling record for a covariate; identity when none was applied.
    ScalingRecord scaling_of(const std::string& name) const;

    /// Checks shapes, finiteness, the [0,1] time range, contiguous subject
    /// runs, and strictly increasing times within each subject.
    void validate() const;
};

/**
 * @brief Standardize the named covariates to mean 0, sd 1 over the panel's
 * rows (sample standard deviation, n-1 denominator).
 *
 * Returns a new panel; scaling records compose with any transform already
 * recorded so they always map the original scale to the stored values.
 * Throws InvalidInput for unknown names or zero-variance columns.
 */
ModelPanel standardize(const ModelPanel& input, std::span<const std::string> covariate_names);

}  // namespace seatvc::panel
