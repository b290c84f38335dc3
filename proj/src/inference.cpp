#include "cvxsim/inference.hpp"

#include "cvxsim/core.hpp"
#include "cvxsim/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cvxsim {

ConditionalMeanSmoother::ConditionalMeanSmoother(Vector proj, Matrix x, double bandwidth)
    : proj_(std::move(proj)), x_(std::move(x)), bandwidth_(bandwidth) {
    if (proj_.size() != x_.rows() || proj_.size() < 1) {
        throw InvalidInputError("ConditionalMeanSmoother: size mismatch");
    }
    if (!(bandwidth_ > 0.0)) {
        throw InvalidInputError("ConditionalMeanSmoother: bandwidth must be positive");
    }
    lo_ = proj_.minCoeff();
    hi_ = proj_.maxCoeff();
}

Vector ConditionalMeanSmoother::operator()(double u) const {
    const double uc = std::clamp(u, lo_, hi_);
    const Eigen::Index n = proj_.size();
    // Rescale by the smallest exponent so tiny bandwidths cannot underflow
    // every weight at once.
    double zmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = (uc - proj_[i]) / bandwidth_;
        zmin = std::min(zmin, z * z);
    }
    Vector num = Vector::Zero(x_.cols());
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = (uc - proj_[i]) / bandwidth_;
        const double wgt = std::exp(-0.5 * (z * z - zmin));
        den += wgt;
        num += wgt * x_.row(i).transpose();
    }
    return num / den;
}

ConditionalMeanSmoother estimate_h(const Dataset& data, const IndexParameter& theta,
                                   std::optional<double> bandwidth) {
    if (theta.dim() != data.d()) {
        throw InvalidInputError("estimate_h: dimension mismatch");
    }
    const Vector proj = data.x * theta.theta;
    double bw;
    if (bandwidth) {
        bw = *bandwidth;
        if (!(bw > 0.0)) {
            throw InvalidInputError("estimate_h: bandwidth must be positive");
        }
    } else {
        const Eigen::Index n = data.n();
        if (n < 10) {
            throw InvalidInputError("estimate_h: need n >= 10 for the default bandwidth");
        }
        const double mean = proj.mean();
        const double sd = std::sqrt((proj.array() - mean).square().sum() /
                                    static_cast<double>(n - 1));
        bw = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
        if (!(bw > 0.0)) {
            throw InvalidInputError("estimate_h: degenerate projection spread");
        }
    }
    return ConditionalMeanSmoother(proj, data.x, bw);
}

Vector score_ell(const FitResult& fit, const ConditionalMeanSmoother& h,
                 const PerpBasis& basis, const Vector& x, double y) {
    return std::visit(
        [&](const auto& link) {
            return efficient_score(fit.theta_hat, link, h, basis, x, y);
        },
        fit.link);
}

CovarianceEstimate plugin_covariance(const FitResult& fit, const Dataset& data) {
    return plugin_covariance(fit, data, perp_basis(fit.theta_hat));
}

CovarianceEstimate plugin_covariance(const FitResult& fit, const Dataset& data,
                                     const PerpBasis& basis) {
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    if (n <= d) {
        throw InvalidInputError("plugin_covariance: need n > d");
    }
    if (basis.H.rows() != d || basis.H.cols() != d - 1) {
        throw InvalidInputError("plugin_covariance: basis shape mismatch");
    }

    const Vector proj = data.x * fit.theta_hat.theta;
    double sigma_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = data.y[i] - link_value(fit.link, proj[i]);
        sigma_sq += r * r;
    }
    sigma_sq /= static_cast<double>(n);

    CovarianceEstimate out{Matrix::Zero(d, d), sigma_sq, basis, false};
    if (sigma_sq == 0.0 || d == 1) {
        out.level_ready = (d == 1);
        return out;
    }

    const ConditionalMeanSmoother h = estimate_h(data, fit.theta_hat);
    Matrix info = Matrix::Zero(d - 1, d - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector ell = score_ell(fit, h, basis, data.x.row(i).transpose(), data.y[i]);
        info.selfadjointView<Eigen::Lower>().rankUpdate(ell);
    }
    info = info.selfadjointView<Eigen::Lower>();
    info /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
    if (eig.info() != Eigen::Success) {
        throw SingularInformationError("plugin_covariance: eigendecomposition failed");
    }
    const Vector evals = eig.eigenvalues();
    const double lmax = evals.maxCoeff();
    if (!(lmax > 0.0) || !evals.allFinite()) {
        throw SingularInformationError("plugin_covariance: information matrix is singular");
    }
    if (evals.minCoeff() < 1e-12 * lmax) {
        throw SingularInformationError(
            "plugin_covariance: information matrix condition number exceeds 1e12");
    }
    const double floor = 1e-12 * lmax;
    const Vector inv_evals = evals.cwiseMax(floor).cwiseInverse();
    const Matrix inv_info =
        eig.eigenvectors() * inv_evals.asDiagonal() * eig.eigenvectors().transpose();

    Matrix sigma =
        (sigma_sq * sigma_sq) * basis.H * inv_info * basis.H.transpose();
    out.sigma = 0.5 * (sigma + sigma.transpose());
    out.level_ready = true;
    return out;
}

std::vector<std::pair<double, double>> confidence_intervals(const CovarianceEstimate& cov,
                                                            const IndexParameter& theta_hat,
                                                            int n, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidInputError("confidence_intervals: level must lie in (0, 1)");
    }
    if (n < 1) {
        throw InvalidInputError("confidence_intervals: n must be positive");
    }
    const Eigen::Index d = theta_hat.dim();
    if (cov.sigma.rows() != d || cov.sigma.cols() != d) {
        throw InvalidInputError("confidence_intervals: covariance shape mismatch");
    }
    const double alpha = 0.5 * (1.0 - level);
    const double z = inverse_normal_cdf(1.0 - alpha);
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        double v = cov.sigma(i, i);
        if (v < -1e-8) {
            throw Error("confidence_intervals: negative variance estimate");
        }
        v = std::max(v, 0.0);
        const double half = z * std::sqrt(v / static_cast<double>(n));
        out.emplace_back(theta_hat[i] - half, theta_hat[i] + half);
    }
    return out;
}

}  // namespace cvxsim
