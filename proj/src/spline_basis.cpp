#include "seatvc/spline_basis.hpp"

#include <algorithm>
#include <cmath>

namespace seatvc::spline {

namespace {

double pow_small(double x, int q) noexcept {
    double r = 1.0;
    for (int i = 0; i < q; ++i) r *= x;
    return r;
}

/// Linear-interpolation quantile (R type 7) over sorted values.
double quantile_type7(const std::vector<double>& sorted, double p) {
    const double m = static_cast<double>(sorted.size());
    double h = (m - 1.0) * p;
    auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo >= sorted.size() - 1) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

void BasisSpec::validate() const {
    if (order < 0 || order > 3) throw InvalidInput("basis order must be in {0,1,2,3}");
    if (!(domain_min < domain_max)) throw InvalidInput("basis domain must have positive width");
    double prev = domain_min;
    for (double k : knots) {
        if (!(k > prev)) throw InvalidInput("knots must be strictly ascending and strictly inside the domain");
        prev = k;
    }
    if (!knots.empty() && !(knots.back() < domain_max))
        throw InvalidInput("knots must lie strictly below the domain maximum");
}

double truncated_power(double t, double knot, int q) noexcept {
    if (t <= knot) return 0.0;
    return pow_small(t - knot, q);
}

std::vector<double> place_knots(std::span<const double> times, int interior_knot_count) {
    if (times.empty()) throw InvalidInput("place_knots: no observation times given");
    if (interior_knot_count < 0) throw InvalidInput("place_knots: negative knot count");
    if (interior_knot_count == 0) return {};

    std::vector<double> distinct(times.begin(), times.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    const int h = interior_knot_count;
    if (static_cast<int>(distinct.size()) < h + 2)
        throw InvalidInput("place_knots: insufficient distinct times (need at least " +
                           std::to_string(h + 2) + ", have " + std::to_string(distinct.size()) + ")");

    std::vector<double> knots(static_cast<std::size_t>(h));
    for (int k = 1; k <= h; ++k)
        knots[static_cast<std::size_t>(k - 1)] =
            quantile_type7(distinct, static_cast<double>(k) / static_cast<double>(h + 1));

    // Collapse any residual ties toward the midpoint with the next distinct time.
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (knots[k] <= knots[k - 1]) {
            auto above = std::upper_bound(distinct.begin(), distinct.end(), knots[k - 1]);
            if (above == distinct.end())
                throw InvalidInput("place_knots: cannot separate tied knots");
            knots[k] = 0.5 * (knots[k - 1] + *above);
        }
    }
    return knots;
}

Eigen::VectorXd basis_row(double t, const BasisSpec& spec) {
    if (t < spec.domain_min || t > spec.domain_max)
        throw InvalidInput("basis_row: time " + std::to_string(t) + " outside domain [" +
                           std::to_string(spec.domain_min) + ", " + std::to_string(spec.domain_max) + "]");
    Eigen::VectorXd row(spec.size());
    basis_row_unchecked(t, spec, row.data());
    return row;
}

void basis_row_unchecked(double t, const BasisSpec& spec, double* out) noexcept {
    double p = 1.0;
    for (int m = 0; m <= spec.order; ++m) {
        out[m] = p;
        p *= t;
    }
    for (int k = 0; k < spec.knot_count(); ++k)
        out[spec.order + 1 + k] = truncated_power(t, spec.knots[static_cast<std::size_t>(k)], spec.order);
}

}  // namespace seatvc::spline
