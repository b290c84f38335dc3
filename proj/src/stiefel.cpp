#include "cvxsim/stiefel.hpp"

#include <cmath>

namespace cvxsim {

Vector cayley_point(const CayleyState& state, double tau) {
    const Vector& a = state.alpha.theta;
    if (tau == 0.0) {
        return a;
    }
    const Vector& g = state.g;
    const double ag = a.dot(g);
    const double gsq = g.squaredNorm();
    const double t2 = tau * tau;
    const double denom = 1.0 - t2 * ag * ag / 4.0 + t2 * gsq / 4.0;
    if (!(denom > 0.0)) {
        throw InvalidInputError("cayley_point: nonpositive denominator");
    }
    const double coef_a = (1.0 + (t2 / 4.0) * (ag * ag - gsq) + tau * ag) / denom;
    const double coef_g = -tau / denom;
    Vector point = coef_a * a + coef_g * g;
    // The transform is orthogonal, so the norm is 1 up to rounding in the
    // rational coefficients; scale that rounding away.
    point /= point.norm();
    return point;
}

std::pair<double, double> feasible_tau_interval(const CayleyState& state, double tau_max) {
    const Vector& alpha = state.alpha.theta;
    const Vector& g = state.g;
    if (!(alpha[0] > 0.0)) {
        throw BoundaryPointError("feasible_tau_interval: first coordinate of theta is zero");
    }
    if (!(tau_max > 0.0)) {
        throw InvalidInputError("feasible_tau_interval: tau_max must be positive");
    }
    const double ag = alpha.dot(g);
    const double gsq = g.squaredNorm();

    // Nonnegativity of the first coordinate along the curve reduces to
    //   (tau^2/4) (ag^2 - gsq) + tau (ag - g1/alpha1) + 1 >= 0,
    // a downward parabola (Cauchy-Schwarz) that is positive at tau = 0. The
    // curve's denominator 1 + tau^2 (gsq - ag^2)/4 is positive everywhere, so
    // it does not cut the interval further.
    const double a = (ag * ag - gsq) / 4.0;
    const double b = ag - g[0] / alpha[0];

    double lo, hi;
    if (a == 0.0) {
        if (b == 0.0) {
            lo = -tau_max;
            hi = tau_max;
        } else if (b > 0.0) {
            lo = -1.0 / b;
            hi = tau_max;
        } else {
            lo = -tau_max;
            hi = -1.0 / b;
        }
    } else {
        const double disc = b * b - 4.0 * a;  // > b^2 since a < 0
        const double sq = std::sqrt(disc);
        const double qq = (b >= 0.0) ? -(b + sq) / 2.0 : -(b - sq) / 2.0;
        const double r1 = qq / a;
        const double r2 = 1.0 / qq;
        lo = std::min(r1, r2);
        hi = std::max(r1, r2);
    }
    return {std::max(lo, -tau_max), std::min(hi, tau_max)};
}

}  // namespace cvxsim
