#pragma once

#include "cvxsim/affine_link.hpp"
#include "cvxsim/spline_link.hpp"
#include "cvxsim/types.hpp"

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace cvxsim {

enum class EstimatorKind { Llse, Plse, CvxLse };

/// Tuning and control knobs for a fit.
struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::Plse;
    double lipschitz_bound = 0.0;       // required positive for Llse
    std::optional<double> lambda;       // Plse; defaults to 0.1 n^{-2/5}
    int max_outer_iter = 100;
    double outer_tol = 1e-8;            // relative criterion decrease
    int n_starts = 5;
    double bin_tol = 1e-6;
    std::uint64_t seed = 0;
    int line_search_grid = 25;

    void validate() const;
};

using Link = std::variant<PiecewiseAffineLink, ConvexSplineLink>;

double link_value(const Link& link, double s);
double link_derivative(const Link& link, double s);

/// Output of the alternating driver: the fitted index direction, the link
/// estimate at that direction, and per-iteration criterion values (which are
/// nonincreasing by construction).
struct FitResult {
    IndexParameter theta_hat;
    Link link;
    std::vector<double> criterion_trace;
    bool converged = false;
    int n_outer = 0;
    int start_index = 0;
};

/// Default smoothing level 0.1 n^{-2/5}.
double default_lambda(int n);

/// Criterion value at (link, theta): the mean squared residual over the full
/// sample, plus lambda^2 times the link roughness for spline links.
double criterion_value(const Dataset& data, const Link& link, const IndexParameter& theta,
                       double lambda = 0.0);

/// Alternating minimization from a single starting direction: rebin at the
/// current theta, refit the link, take one monotone theta descent step, and
/// stop once the relative criterion decrease falls below outer_tol (or the
/// iteration cap is reached, leaving converged = false).
///
/// Throws RestartRequiredError (carrying theta) when the run cannot continue
/// from the current direction, e.g. when all projections collapse into too
/// few bins.
FitResult fit_alternating(const Dataset& data, const IndexParameter& theta0,
                          const EstimatorConfig& cfg);

/// Multi-start driver: runs fit_alternating from the normalized least squares
/// coefficient direction (start 0) and from cfg.n_starts - 1 random directions
/// drawn uniformly on the sphere, then returns the result with the smallest
/// final criterion (lowest start index on ties). Starts run on up to
/// `threads` worker threads; results do not depend on the thread count.
FitResult fit(const Dataset& data, const EstimatorConfig& cfg, int threads = 1);

/// Link evaluated at theta_hat^T x for each row of x_new.
Vector predict(const FitResult& fit, const Matrix& x_new);

}  // namespace cvxsim
