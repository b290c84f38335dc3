#pragma once

#include "cvxsim/types.hpp"

namespace cvxsim {

/// Linear inequality system A m >= b.
struct LinearConstraints {
    Matrix A;
    Vector b;

    LinearConstraints(Matrix A_in, Vector b_in);

    Eigen::Index rows() const { return A.rows(); }
    Eigen::Index cols() const { return A.cols(); }
};

/// Nonnegative least squares: minimize |E u - l| over u >= 0.
///
/// Active-set method with in-place Householder triangularization of the
/// passive columns and Givens downdates on removal. Terminates when every
/// dual w_j = [E^T (l - E u)]_j on the zero set is <= tol, so the result
/// satisfies the KKT conditions at that tolerance (duals of strictly
/// positive coordinates vanish by the least-squares solve).
///
/// Ties in the entering dual pick the lowest column index. Throws
/// NonConvergenceError (carrying the best iterate) after 3q outer
/// iterations.
Vector nnls(const Matrix& E, const Vector& l, double tol = 1e-10);

/// Least distance programming: minimize |z|^2 subject to G z >= h.
///
/// Reduced to NNLS on E = [G^T; h^T] against the last unit vector; the
/// solution is recovered from the NNLS residual r = E u - l as
/// z_i = -r_i / r_last. Throws InfeasibleConstraintsError when |r_last|
/// is below 1e-12, which characterizes an empty feasible set.
Vector ldp(const Matrix& G, const Vector& h, double tol = 1e-10);

/// Minimize sum_j w_j (ybar_j - m_j)^2 subject to A m >= b, via the change of
/// variables z = Q^{1/2}(m - ybar) and an LDP solve. Q is the diagonal bin
/// weight matrix of the projection. Returns the fitted vector m.
Vector constrained_lsq(const SortedProjection& proj, const LinearConstraints& cons);

}  // namespace cvxsim
