#pragma once

#include "cvxsim/types.hpp"

namespace cvxsim {

/// Scales v to unit norm and flips its sign so the first coordinate is
/// nonnegative (no flip when the first coordinate is exactly zero).
/// Inputs that already satisfy both invariants are returned unchanged,
/// which makes the operation exactly idempotent.
/// Throws InvalidInputError for the zero vector.
IndexParameter normalize_theta(const Vector& v);

/// Projects every covariate row onto theta, sorts the projections, and merges
/// runs of near-duplicate values into weighted bins.
///
/// Merging is greedy left to right: a bin is anchored at its first (smallest)
/// projection and absorbs every following point closer than tol to that
/// anchor. The bin keeps the anchor as its knot t_j, the mean response as
/// ybar_j, and the member count as w_j.
///
/// Throws DegenerateProjectionError when everything collapses into one bin.
SortedProjection project_and_bin(const Dataset& data, const IndexParameter& theta,
                                 double tol = 1e-6);

/// Orthonormal basis of the hyperplane orthogonal to theta, computed from the
/// Householder reflection that maps -e1 to theta (never degenerate on the
/// half-sphere since theta[0] >= 0). Deterministic in theta.
PerpBasis perp_basis(const IndexParameter& theta);

}  // namespace cvxsim
