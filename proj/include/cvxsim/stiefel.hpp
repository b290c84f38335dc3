#pragma once

#include "cvxsim/core.hpp"
#include "cvxsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace cvxsim {

/// Current point on the half-sphere together with the criterion gradient
/// there. The skew update g alpha^T - alpha g^T is never materialized; the
/// curve through alpha is evaluated in closed form from alpha^T g and |g|^2.
struct CayleyState {
    IndexParameter alpha;
    Vector g;
};

/// Point reached after time tau along the Cayley curve
///   theta(tau) = (I + tau A / 2)^{-1} (I - tau A / 2) alpha,
/// which stays exactly on the unit sphere. Throws InvalidInputError when the
/// rational form's denominator is not positive.
Vector cayley_point(const CayleyState& state, double tau);

/// Closed interval of step sizes keeping the first coordinate of theta(tau)
/// nonnegative, intersected with the region where the curve's denominator is
/// positive and capped at +-tau_max. Always contains zero. Throws
/// BoundaryPointError when alpha sits on the boundary (first coordinate 0).
std::pair<double, double> feasible_tau_interval(const CayleyState& state,
                                                double tau_max = 1e3);

/// Gradient in theta of the mean squared residual with the link held fixed:
///   -(2/n) sum_i (y_i - m(theta^T x_i)) m'(theta^T x_i) x_i.
template <class LinkT>
Vector link_gradient(const Dataset& data, const LinkT& link, const IndexParameter& theta) {
    const Eigen::Index n = data.n();
    const Vector proj = data.x * theta.theta;
    Vector coef(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        coef[i] = (data.y[i] - link.value(proj[i])) * link.derivative(proj[i]);
    }
    return (-2.0 / static_cast<double>(n)) * (data.x.transpose() * coef);
}

namespace detail {

/// Mean squared residual of the fixed link at theta_vec.
template <class LinkT>
double mean_sq_residual(const Dataset& data, const LinkT& link, const Vector& theta_vec) {
    const Vector proj = data.x * theta_vec;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double r = data.y[i] - link.value(proj[i]);
        acc += r * r;
    }
    return acc / static_cast<double>(data.n());
}

}  // namespace detail

/// One monotone descent step in theta with the link fixed: evaluates the
/// criterion on geometric grids of tau on both sides of zero inside the
/// feasible interval, refines around the best point by golden section, and
/// returns the improved (normalized) point, or theta unchanged when no grid
/// point improves the criterion.
template <class LinkT>
IndexParameter descend_theta(const Dataset& data, const LinkT& link,
                             const IndexParameter& theta, int grid = 25,
                             double tau_max = 1e3) {
    if (grid < 3) {
        throw InvalidInputError("descend_theta: grid must be at least 3");
    }
    const Vector g = link_gradient(data, link, theta);
    const double gnorm = g.norm();
    if (gnorm == 0.0) {
        return theta;
    }
    const double ag = theta.theta.dot(g);
    // No tangential component: the curve is constant.
    if ((g - ag * theta.theta).norm() <= 1e-14 * (1.0 + gnorm)) {
        return theta;
    }

    const CayleyState state{theta, g};
    const auto [lo, hi] = feasible_tau_interval(state, tau_max);

    const double f0 = detail::mean_sq_residual(data, link, theta.theta);
    std::vector<std::pair<double, double>> evals;  // (tau, f)
    evals.reserve(static_cast<std::size_t>(2 * grid + 1));
    evals.emplace_back(0.0, f0);

    const auto eval_at = [&](double tau) {
        const Vector cand = cayley_point(state, tau);
        evals.emplace_back(tau, detail::mean_sq_residual(data, link, cand));
    };

    const double shrink = std::pow(1e-6, 1.0 / static_cast<double>(grid - 1));
    for (double end : {hi, lo}) {
        if (end == 0.0) continue;
        double tau = end;
        for (int i = 0; i < grid; ++i, tau *= shrink) {
            eval_at(tau);
        }
    }

    std::sort(evals.begin(), evals.end());
    std::size_t best = 0;
    for (std::size_t i = 1; i < evals.size(); ++i) {
        if (evals[i].second < evals[best].second) {
            best = i;
        }
    }

    // Golden-section refinement between the neighbors of the best grid point.
    double a = (best > 0) ? evals[best - 1].first : lo;
    double b = (best + 1 < evals.size()) ? evals[best + 1].first : hi;
    double best_tau = evals[best].first;
    double best_f = evals[best].second;
    const double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = detail::mean_sq_residual(data, link, cayley_point(state, x1));
    double f2 = detail::mean_sq_residual(data, link, cayley_point(state, x2));
    for (int it = 0; it < 20; ++it) {
        if (f1 < best_f) { best_f = f1; best_tau = x1; }
        if (f2 < best_f) { best_f = f2; best_tau = x2; }
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = detail::mean_sq_residual(data, link, cayley_point(state, x1));
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = detail::mean_sq_residual(data, link, cayley_point(state, x2));
        }
    }
    if (f1 < best_f) { best_f = f1; best_tau = x1; }
    if (f2 < best_f) { best_f = f2; best_tau = x2; }

    if (best_tau != 0.0) {
        // Judge the step at the point actually returned: normalization can
        // flip the sign at the boundary of the half-sphere, and the criterion
        // is not symmetric under that flip for a fixed link.
        const IndexParameter cand = normalize_theta(cayley_point(state, best_tau));
        if (detail::mean_sq_residual(data, link, cand.theta) < f0) {
            return cand;
        }
    }
    return theta;
}

}  // namespace cvxsim
