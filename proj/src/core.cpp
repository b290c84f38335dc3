#include "cvxsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cvxsim {

Dataset::Dataset(Matrix x_in, Vector y_in) : x(std::move(x_in)), y(std::move(y_in)) {
    if (x.rows() < 3) {
        throw InvalidInputError("Dataset: need at least 3 observations");
    }
    if (x.cols() < 1) {
        throw InvalidInputError("Dataset: need at least 1 covariate");
    }
    if (y.size() != x.rows()) {
        throw InvalidInputError("Dataset: response length does not match covariate rows");
    }
    if (!x.allFinite() || !y.allFinite()) {
        throw InvalidInputError("Dataset: entries must be finite");
    }
}

IndexParameter::IndexParameter(Vector v) : theta(std::move(v)) {
    if (theta.size() < 1) {
        throw InvalidInputError("IndexParameter: empty vector");
    }
    if (std::abs(theta.norm() - 1.0) > 1e-12) {
        throw InvalidInputError("IndexParameter: vector is not unit norm");
    }
    if (theta[0] < 0.0) {
        throw InvalidInputError("IndexParameter: first coordinate must be nonnegative");
    }
}

IndexParameter normalize_theta(const Vector& v) {
    const double nrm = v.norm();
    if (!(nrm > 0.0) || !v.allFinite()) {
        throw InvalidInputError("normalize_theta: zero or non-finite vector");
    }
    const double s = (v[0] < 0.0) ? -1.0 : 1.0;
    // Sign flips and the pass-through of already-unit vectors are exact, so
    // applying the operation twice reproduces its output bit for bit.
    if (std::abs(nrm - 1.0) <= 1e-12) {
        return IndexParameter(s * v);
    }
    return IndexParameter((s / nrm) * v);
}

SortedProjection project_and_bin(const Dataset& data, const IndexParameter& theta,
                                 double tol) {
    if (!(tol > 0.0)) {
        throw InvalidInputError("project_and_bin: tol must be positive");
    }
    if (theta.dim() != data.d()) {
        throw InvalidInputError("project_and_bin: dimension mismatch");
    }
    const Eigen::Index n = data.n();
    const Vector proj = data.x * theta.theta;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return proj[a] < proj[b]; });

    std::vector<double> t, ysum, w;
    std::vector<Eigen::Index> map(static_cast<std::size_t>(n));
    double anchor = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = order[static_cast<std::size_t>(k)];
        const double p = proj[i];
        if (k == 0 || p - anchor >= tol) {
            anchor = p;
            t.push_back(p);
            ysum.push_back(data.y[i]);
            w.push_back(1.0);
        } else {
            ysum.back() += data.y[i];
            w.back() += 1.0;
        }
        map[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(t.size()) - 1;
    }

    const auto m = static_cast<Eigen::Index>(t.size());
    if (m < 2) {
        throw DegenerateProjectionError(
            "project_and_bin: all projections fall into a single bin");
    }

    SortedProjection out;
    out.t = Eigen::Map<const Vector>(t.data(), m);
    out.w = Eigen::Map<const Vector>(w.data(), m);
    out.ybar = Eigen::Map<const Vector>(ysum.data(), m).cwiseQuotient(out.w);
    out.map = std::move(map);
    return out;
}

PerpBasis perp_basis(const IndexParameter& theta) {
    const Eigen::Index d = theta.dim();
    PerpBasis out;
    out.H.resize(d, d - 1);
    if (d == 1) {
        return out;
    }
    // Reflector u = theta + e1 swaps -e1 and theta; columns 2..d of the
    // reflection are then orthonormal and orthogonal to theta. |u|^2 =
    // 2 (1 + theta[0]) stays away from zero because theta[0] >= 0.
    Vector u = theta.theta;
    u[0] += 1.0;
    const double scale = 2.0 / u.squaredNorm();
    for (Eigen::Index j = 1; j < d; ++j) {
        out.H.col(j - 1) = -scale * u[j] * u;
        out.H(j, j - 1) += 1.0;
    }
    return out;
}

}  // namespace cvxsim
