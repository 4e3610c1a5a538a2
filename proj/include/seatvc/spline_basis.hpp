#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "seatvc/errors.hpp"

namespace seatvc::spline {

/**
 * @brief Truncated power basis layout for one smooth coefficient function.
 *
 * The basis over a closed time domain [domain_min, domain_max] is
 *
 *     1, t, t^2, ..., t^q, (t - kappa_1)_+^q, ..., (t - kappa_H)_+^q
 *
 * where the first q+1 entries form the global polynomial block and the
 * remaining H entries are truncated power functions anchored at the interior
 * knots kappa_1 < ... < kappa_H. Knots are named kappa internally; tau is
 * reserved for the quality-adjustment coefficient functions elsewhere.
 */
struct BasisSpec {
    int order = 3;                    ///< polynomial order q, in {0,1,2,3}
    std::vector<double> knots;        ///< strictly ascending, strictly inside the domain
    double domain_min = 0.0;
    double domain_max = 1.0;

    int knot_count() const { return static_cast<int>(knots.size()); }

    /// Number of basis functions: q + 1 + H.
    int size() const { return order + 1 + knot_count(); }

    /// Throws InvalidInput when the invariants above are violated.
    void validate() const;
};

/// (t - knot)_+^q: zero for t <= knot, else (t - knot)^q. Total function;
/// q = 0 gives the unit step. Computed by repeated multiplication so dyadic
/// inputs produce exact results.
double truncated_power(double t, double knot, int q) noexcept;

/**
 * @brief Place H interior knots at empirical quantiles of the distinct
 * observation times.
 *
 * Knot k sits at the k/(H+1) quantile (linear-interpolation convention,
 * R type 7) of the sorted distinct times. Requires at least H+2 distinct
 * times when H > 0; any residual ties from near-identical inputs are
 * collapsed by nudging toward midpoints of neighboring distinct times.
 */
std::vector<double> place_knots(std::span<const double> times, int interior_knot_count);

/// Evaluate the full basis row at t. Throws InvalidInput when t lies outside
/// the domain; extrapolation is an explicit caller decision upstream.
Eigen::VectorXd basis_row(double t, const BasisSpec& spec);

/// Fill `out` (length spec.size()) with the basis row; no domain check.
/// Used on hot paths after the caller has validated the grid.
void basis_row_unchecked(double t, const BasisSpec& spec, double* out) noexcept;

}  // namespace seatvc::spline
