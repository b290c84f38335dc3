#include "cvxsim/affine_link.hpp"

#include "cvxsim/qp.hpp"

#include <algorithm>
#include <cmath>

namespace cvxsim {

PiecewiseAffineLink::PiecewiseAffineLink(Vector t_in, Vector values,
                                         std::optional<double> bound)
    : t(std::move(t_in)), m_vals(std::move(values)), lipschitz_bound(bound) {
    const Eigen::Index m = t.size();
    if (m < 1 || m_vals.size() != m) {
        throw InvalidInputError("PiecewiseAffineLink: knot/value size mismatch");
    }
    if (!t.allFinite() || !m_vals.allFinite()) {
        throw InvalidInputError("PiecewiseAffineLink: entries must be finite");
    }
    double prev_slope = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        if (!(t[j] < t[j + 1])) {
            throw InvalidInputError("PiecewiseAffineLink: knots must be strictly increasing");
        }
        const double slope = (m_vals[j + 1] - m_vals[j]) / (t[j + 1] - t[j]);
        const double slack = 1e-8 * (1.0 + std::max(std::abs(slope), std::abs(prev_slope)));
        if (slope < prev_slope - slack) {
            throw InvalidInputError("PiecewiseAffineLink: slopes must be nondecreasing");
        }
        if (lipschitz_bound &&
            std::abs(slope) > *lipschitz_bound + 1e-8 * (1.0 + *lipschitz_bound)) {
            throw InvalidInputError("PiecewiseAffineLink: slope exceeds the Lipschitz bound");
        }
        prev_slope = slope;
    }
}

Eigen::Index PiecewiseAffineLink::segment(double s) const {
    const Eigen::Index m = t.size();
    const auto it = std::upper_bound(t.data(), t.data() + m, s);
    const Eigen::Index j = static_cast<Eigen::Index>(it - t.data()) - 1;
    return std::clamp<Eigen::Index>(j, 0, m - 2);
}

double PiecewiseAffineLink::value(double s) const {
    if (t.size() == 1) {
        return m_vals[0];
    }
    const Eigen::Index j = segment(s);
    const double slope = (m_vals[j + 1] - m_vals[j]) / (t[j + 1] - t[j]);
    return m_vals[j] + slope * (s - t[j]);
}

double PiecewiseAffineLink::derivative(double s) const {
    if (t.size() < 2) {
        throw InvalidInputError("PiecewiseAffineLink: no derivative for a single knot");
    }
    const Eigen::Index j = segment(s);
    return (m_vals[j + 1] - m_vals[j]) / (t[j + 1] - t[j]);
}

namespace {

// Rows of A m >= b encoding nondecreasing slopes, optionally sandwiched
// between -L and L.
LinearConstraints slope_constraints(const Vector& t, std::optional<double> L) {
    const Eigen::Index m = t.size();
    const Eigen::Index k = L ? m : m - 2;
    Matrix A = Matrix::Zero(k, m);
    Vector b = Vector::Zero(k);
    Eigen::Index row = 0;
    if (L) {
        const double d0 = t[1] - t[0];
        A(row, 0) = -1.0 / d0;
        A(row, 1) = 1.0 / d0;
        b[row] = -*L;
        ++row;
    }
    for (Eigen::Index j = 0; j + 2 < m; ++j, ++row) {
        const double dl = t[j + 1] - t[j];
        const double dr = t[j + 2] - t[j + 1];
        A(row, j) = 1.0 / dl;
        A(row, j + 1) = -1.0 / dl - 1.0 / dr;
        A(row, j + 2) = 1.0 / dr;
    }
    if (L) {
        const double dm = t[m - 1] - t[m - 2];
        A(row, m - 2) = 1.0 / dm;
        A(row, m - 1) = -1.0 / dm;
        b[row] = -*L;
    }
    return LinearConstraints(std::move(A), std::move(b));
}

// Rounding in the distance solver can leave slope violations that are tiny in
// value units but large in slope units when knots sit close together. Repair:
// project the slopes onto the nondecreasing cone (pool adjacent violators,
// weighted by the gaps), clip to the bound, and rebuild the values keeping the
// weighted mean. The values move by at most the violation in value units.
Vector enforce_slope_cone(const Vector& t, const Vector& values, const Vector& w,
                          std::optional<double> L) {
    const Eigen::Index m = t.size();
    Vector slopes(m - 1);
    bool dirty = false;
    double prev = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        slopes[j] = (values[j + 1] - values[j]) / (t[j + 1] - t[j]);
        if (slopes[j] < prev || (L && std::abs(slopes[j]) > *L)) {
            dirty = true;
        }
        prev = slopes[j];
    }
    if (!dirty) {
        return values;
    }

    std::vector<double> block_val, block_wgt;
    block_val.reserve(static_cast<std::size_t>(m - 1));
    std::vector<Eigen::Index> block_len;
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        double v = slopes[j];
        double wg = t[j + 1] - t[j];
        Eigen::Index len = 1;
        while (!block_val.empty() && block_val.back() >= v) {
            v = (block_val.back() * block_wgt.back() + v * wg) / (block_wgt.back() + wg);
            wg += block_wgt.back();
            len += block_len.back();
            block_val.pop_back();
            block_wgt.pop_back();
            block_len.pop_back();
        }
        block_val.push_back(v);
        block_wgt.push_back(wg);
        block_len.push_back(len);
    }
    Eigen::Index j = 0;
    for (std::size_t b = 0; b < block_val.size(); ++b) {
        double v = block_val[b];
        if (L) v = std::clamp(v, -*L, *L);
        for (Eigen::Index k = 0; k < block_len[b]; ++k, ++j) {
            slopes[j] = v;
        }
    }

    Vector rebuilt(m);
    rebuilt[0] = 0.0;
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
        rebuilt[i + 1] = rebuilt[i] + slopes[i] * (t[i + 1] - t[i]);
    }
    const double shift = w.dot(values - rebuilt) / w.sum();
    rebuilt.array() += shift;
    return rebuilt;
}

}  // namespace

PiecewiseAffineLink fit_lipschitz(const SortedProjection& proj, double L) {
    if (proj.size() < 2) {
        throw InvalidInputError("fit_lipschitz: need at least two bins");
    }
    if (!(L > 0.0)) {
        throw InvalidInputError("fit_lipschitz: Lipschitz bound must be positive");
    }
    const Vector fitted = constrained_lsq(proj, slope_constraints(proj.t, L));
    return PiecewiseAffineLink(proj.t, enforce_slope_cone(proj.t, fitted, proj.w, L), L);
}

PiecewiseAffineLink fit_convex(const SortedProjection& proj) {
    const Eigen::Index m = proj.size();
    if (m < 2) {
        throw InvalidInputError("fit_convex: need at least two bins");
    }
    if (m == 2) {
        return PiecewiseAffineLink(proj.t, proj.ybar);
    }
    const Vector fitted = constrained_lsq(proj, slope_constraints(proj.t, std::nullopt));
    return PiecewiseAffineLink(proj.t,
                               enforce_slope_cone(proj.t, fitted, proj.w, std::nullopt));
}

double eval_affine(const PiecewiseAffineLink& link, double s) {
    return link.value(s);
}

double right_derivative(const PiecewiseAffineLink& link, double s) {
    return link.derivative(s);
}

}  // namespace cvxsim
