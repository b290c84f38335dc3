#pragma once

#include "cvxsim/driver.hpp"
#include "cvxsim/types.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace cvxsim {

/// Kernel regression of each covariate coordinate on the projected index,
/// used as the conditional-mean plug-in. Gaussian kernel; evaluation clamps
/// the query to the observed projection range.
class ConditionalMeanSmoother {
public:
    ConditionalMeanSmoother(Vector proj, Matrix x, double bandwidth);

    /// Smoothed conditional mean of the covariates at projection value u.
    Vector operator()(double u) const;

    double bandwidth() const { return bandwidth_; }

private:
    Vector proj_;
    Matrix x_;
    double bandwidth_;
    double lo_;
    double hi_;
};

/// Builds the smoother at theta. The default bandwidth is the normal
/// reference rule 1.06 sd(theta^T x) n^{-1/5} (requires n >= 10);
/// an explicit bandwidth must be positive.
ConditionalMeanSmoother estimate_h(const Dataset& data, const IndexParameter& theta,
                                   std::optional<double> bandwidth = {});

/// Efficient-score vector (y - m(u)) m'(u) H^T (x - h(u)) at u = theta^T x.
template <class LinkT>
Vector efficient_score(const IndexParameter& theta, const LinkT& link,
                       const ConditionalMeanSmoother& h, const PerpBasis& basis,
                       const Vector& x, double y) {
    const double u = theta.theta.dot(x);
    const double resid = y - link.value(u);
    const double slope = link.derivative(u);
    return (resid * slope) * (basis.H.transpose() * (x - h(u)));
}

Vector score_ell(const FitResult& fit, const ConditionalMeanSmoother& h,
                 const PerpBasis& basis, const Vector& x, double y);

/// Plug-in covariance of the fitted index direction. Singular along
/// theta_hat by construction (its range is the orthogonal complement).
struct CovarianceEstimate {
    Matrix sigma;
    double sigma_sq_hat = 0.0;
    PerpBasis basis;
    bool level_ready = false;
};

/// sigma_hat^4 H [ (1/n) sum_i ell_i ell_i^T ]^{-1} H^T with
/// sigma_hat^2 the mean squared residual. The inner matrix is inverted by
/// symmetric eigendecomposition with eigenvalues floored at 1e-12 times the
/// largest; a condition number beyond 1e12 raises SingularInformationError.
CovarianceEstimate plugin_covariance(const FitResult& fit, const Dataset& data);

/// Same with a caller-supplied orthonormal basis of the complement of
/// theta_hat; the result does not depend on that choice.
CovarianceEstimate plugin_covariance(const FitResult& fit, const Dataset& data,
                                     const PerpBasis& basis);

/// Per-coordinate two-sided intervals theta_i -+ z (Sigma_ii / n)^{1/2} at the
/// given coverage level (0.95 uses the upper 2.5% normal quantile).
std::vector<std::pair<double, double>> confidence_intervals(const CovarianceEstimate& cov,
                                                            const IndexParameter& theta_hat,
                                                            int n, double level);

}  // namespace cvxsim
