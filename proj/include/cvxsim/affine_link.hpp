#pragma once

#include "cvxsim/types.hpp"

#include <optional>

namespace cvxsim {

/// Convex piecewise affine link: knot locations t with fitted values m_vals.
/// Successive segment slopes are nondecreasing; when lipschitz_bound is set
/// all slopes lie in [-L, L] (both up to a 1e-8 slack). Evaluation linearly
/// interpolates between knots and extrapolates with the boundary slopes,
/// which preserves convexity and the slope bound on the whole line.
struct PiecewiseAffineLink {
    Vector t;
    Vector m_vals;
    std::optional<double> lipschitz_bound;

    PiecewiseAffineLink(Vector t_in, Vector values, std::optional<double> bound = {});

    Eigen::Index size() const { return t.size(); }

    double value(double s) const;

    /// Right derivative: the slope of the segment to the right of s
    /// (the last slope for s at or beyond the second-to-last knot).
    double derivative(double s) const;

private:
    Eigen::Index segment(double s) const;
};

/// Best convex fit with slopes bounded by L, in the weighted least squares
/// sense of the binned projection.
PiecewiseAffineLink fit_lipschitz(const SortedProjection& proj, double L);

/// Best convex fit with unbounded slopes. With only two bins the weighted
/// least squares line interpolates the bin means.
PiecewiseAffineLink fit_convex(const SortedProjection& proj);

double eval_affine(const PiecewiseAffineLink& link, double s);
double right_derivative(const PiecewiseAffineLink& link, double s);

}  // namespace cvxsim
