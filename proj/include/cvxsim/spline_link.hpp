#pragma once

#include "cvxsim/types.hpp"

namespace cvxsim {

/// Banded (m-2) x m matrix of second-order divided differences. Row i has
/// nonzero entries only in columns i, i+1, i+2; K v vanishes for v affine in
/// the knots.
struct SecondDiffBands {
    Vector d0;  // K(i, i)
    Vector d1;  // K(i, i+1)
    Vector d2;  // K(i, i+2)

    Eigen::Index rows() const { return d0.size(); }
    Eigen::Index cols() const { return d0.size() + 2; }

    Vector apply(const Vector& v) const;           // K v
    Vector apply_transpose(const Vector& u) const; // K^T u
    Matrix dense() const;
};

/// K_{i,i} = 1/((t_{i+1}-t_i)(t_{i+2}-t_i)),
/// K_{i,i+1} = -1/((t_{i+2}-t_{i+1})(t_{i+1}-t_i)),
/// K_{i,i+2} = 1/((t_{i+2}-t_i)(t_{i+2}-t_{i+1})).
SecondDiffBands build_K(const Vector& t);

/// The m-2 local hat functions scaled by 1/(t_{i+2} - t_i), evaluated at s.
/// Component i is supported on [t_i, t_{i+2}) and peaks at t_{i+1}; at most
/// two components are nonzero at any point.
Vector basis_M(const Vector& t, double s);

/// T(alpha) = integral of M(s) M(s)^T over { s : alpha^T M(s) > 0 }.
///
/// alpha^T M is affine on every knot interval, so the positive region is a
/// union of subintervals with endpoints found by linear root finding, and the
/// integrand entries are quadratics integrated exactly (two-point Gauss rule).
/// The result is symmetric PSD with bandwidth 1.
Matrix integral_T(const Vector& alpha, const Vector& t);

/// Convexity-constrained smoothing spline on the binned projection.
///
/// Stores the fixed-point data (knots, fitted knot values, coefficient vector
/// alpha, penalty scale lambda). The second derivative of the fitted function
/// is s -> max(alpha^T M(s), 0): nonnegative by construction, zero outside
/// (t_1, t_m). Evaluation reconstructs, on each knot interval, the unique
/// function with that curvature matching the fitted values at both endpoints;
/// outside the knot range it extrapolates linearly with the boundary slopes.
class ConvexSplineLink {
public:
    ConvexSplineLink(Vector t, Vector values, Vector alpha, double lambda);

    const Vector& knots() const { return t_; }
    const Vector& values() const { return m_vals_; }
    const Vector& alpha() const { return alpha_; }
    double lambda() const { return lambda_; }
    Eigen::Index size() const { return t_.size(); }

    double value(double s) const;
    double derivative(double s) const;
    double second_derivative(double s) const;

    /// Integral of the squared second derivative over the knot range.
    double roughness() const;

private:
    // Affine nonnegative curvature piece on [x0, x1] with running integrals
    // of the curvature (i1) and of its integral (i2), both taken from the
    // interval's left knot.
    struct Piece {
        double x0, x1, g0, slope, i1, i2;
    };

    Eigen::Index interval(double s) const;

    Vector t_;
    Vector m_vals_;
    Vector alpha_;
    double lambda_;

    std::vector<Piece> pieces_;          // flattened, at most two per interval
    std::vector<int> piece_start_;       // first piece of each interval
    Vector c_;                           // left-endpoint slope per interval
    double deriv_right_ = 0.0;
    double roughness_ = 0.0;
};

/// Penalized fit: minimize sum_j w_j (ybar_j - m_j)^2 + lambda^2 J^2(m) over
/// convex m with absolutely continuous derivative, where J^2 is the integral
/// of the squared second derivative.
///
/// Solves the nonsmooth fixed-point system
///     [T(alpha) + lambda^2 K Q^{-1} K^T] alpha = K ybar
/// by damped iteration from alpha_i = (t_{i+2} - t_i)/4: full step first, the
/// step is halved whenever the penalized objective increases, with a floor of
/// 2^-20 before declaring non-convergence. Iterates until the relative alpha
/// change drops below tol; the linear solves use an LDL^T factorization,
/// banded (bandwidth 2) once the system is large enough for it to pay off.
/// The fitted values are recovered as m = ybar - lambda^2 Q^{-1} K^T alpha.
ConvexSplineLink fit_penalized(const SortedProjection& proj, double lambda,
                               int max_iter = 200, double tol = 1e-9);

double eval_spline(const ConvexSplineLink& link, double s);
double spline_derivative(const ConvexSplineLink& link, double s);

}  // namespace cvxsim
