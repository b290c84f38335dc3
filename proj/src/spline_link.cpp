#include "cvxsim/spline_link.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cvxsim {

Vector SecondDiffBands::apply(const Vector& v) const {
    const Eigen::Index r = rows();
    Vector out(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        out[i] = d0[i] * v[i] + d1[i] * v[i + 1] + d2[i] * v[i + 2];
    }
    return out;
}

Vector SecondDiffBands::apply_transpose(const Vector& u) const {
    const Eigen::Index r = rows();
    Vector out = Vector::Zero(cols());
    for (Eigen::Index i = 0; i < r; ++i) {
        out[i] += d0[i] * u[i];
        out[i + 1] += d1[i] * u[i];
        out[i + 2] += d2[i] * u[i];
    }
    return out;
}

Matrix SecondDiffBands::dense() const {
    Matrix out = Matrix::Zero(rows(), cols());
    for (Eigen::Index i = 0; i < rows(); ++i) {
        out(i, i) = d0[i];
        out(i, i + 1) = d1[i];
        out(i, i + 2) = d2[i];
    }
    return out;
}

SecondDiffBands build_K(const Vector& t) {
    const Eigen::Index m = t.size();
    if (m < 3) {
        throw InvalidInputError("build_K: need at least three knots");
    }
    SecondDiffBands K;
    K.d0.resize(m - 2);
    K.d1.resize(m - 2);
    K.d2.resize(m - 2);
    for (Eigen::Index i = 0; i + 2 < m; ++i) {
        const double g01 = t[i + 1] - t[i];
        const double g12 = t[i + 2] - t[i + 1];
        const double g02 = t[i + 2] - t[i];
        if (!(g01 > 0.0) || !(g12 > 0.0)) {
            throw InvalidInputError("build_K: knots must be strictly increasing");
        }
        K.d0[i] = 1.0 / (g01 * g02);
        K.d1[i] = -1.0 / (g12 * g01);
        K.d2[i] = 1.0 / (g02 * g12);
    }
    return K;
}

Vector basis_M(const Vector& t, double s) {
    const Eigen::Index m = t.size();
    if (m < 3) {
        throw InvalidInputError("basis_M: need at least three knots");
    }
    Vector out = Vector::Zero(m - 2);
    if (s < t[0] || s >= t[m - 1]) {
        return out;
    }
    const auto it = std::upper_bound(t.data(), t.data() + m, s);
    const Eigen::Index j = static_cast<Eigen::Index>(it - t.data()) - 1;
    if (j <= m - 3) {  // rising branch of M_j on [t_j, t_{j+1})
        out[j] = (s - t[j]) / ((t[j + 2] - t[j]) * (t[j + 1] - t[j]));
    }
    if (j >= 1) {  // falling branch of M_{j-1} on [t_j, t_{j+1})
        out[j - 1] = (t[j + 1] - s) / ((t[j + 1] - t[j - 1]) * (t[j + 1] - t[j]));
    }
    return out;
}

namespace {

// Values of alpha^T M at the two endpoints of knot interval j; the function
// is affine in between.
inline void interval_endpoint_values(const Vector& t, const Vector& alpha,
                                     Eigen::Index j, double& la, double& lb) {
    const Eigen::Index m = t.size();
    la = (j >= 1) ? alpha[j - 1] / (t[j + 1] - t[j - 1]) : 0.0;
    lb = (j <= m - 3) ? alpha[j] / (t[j + 2] - t[j]) : 0.0;
}

// Subinterval of [tj, tj1] where the affine function through (tj, la) and
// (tj1, lb) is positive. Returns false when that region is empty.
inline bool positive_segment(double tj, double tj1, double la, double lb,
                             double& a, double& b, double& ga, double& gb) {
    if (la > 0.0 && lb > 0.0) {
        a = tj; b = tj1; ga = la; gb = lb;
        return true;
    }
    if (la <= 0.0 && lb <= 0.0) {
        return false;
    }
    const double rho = tj + (tj1 - tj) * la / (la - lb);
    if (la > 0.0) {
        a = tj; b = rho; ga = la; gb = 0.0;
    } else {
        a = rho; b = tj1; ga = 0.0; gb = lb;
    }
    return b > a;
}

// Walks the knot intervals and accumulates the Gram contributions of the
// positive region through `add(p, q, value)` with p <= q.
template <class Add>
void accumulate_T(const Vector& alpha, const Vector& t, Add&& add) {
    const Eigen::Index m = t.size();
    const double inv_sqrt3 = 0.5773502691896257645;
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        double la, lb, a, b, ga, gb;
        interval_endpoint_values(t, alpha, j, la, lb);
        if (!positive_segment(t[j], t[j + 1], la, lb, a, b, ga, gb)) {
            continue;
        }
        const double gap = t[j + 1] - t[j];
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        const double nodes[2] = {mid - half * inv_sqrt3, mid + half * inv_sqrt3};

        // M values at a node: rising hat j and falling hat j-1.
        double rise[2] = {0.0, 0.0};
        double fall[2] = {0.0, 0.0};
        const bool has_rise = (j <= m - 3);
        const bool has_fall = (j >= 1);
        for (int k = 0; k < 2; ++k) {
            if (has_rise) rise[k] = (nodes[k] - t[j]) / ((t[j + 2] - t[j]) * gap);
            if (has_fall) fall[k] = (t[j + 1] - nodes[k]) / ((t[j + 1] - t[j - 1]) * gap);
        }
        // Two-point Gauss is exact for the quadratic products.
        if (has_fall) {
            add(j - 1, j - 1, half * (fall[0] * fall[0] + fall[1] * fall[1]));
        }
        if (has_rise) {
            add(j, j, half * (rise[0] * rise[0] + rise[1] * rise[1]));
        }
        if (has_fall && has_rise) {
            add(j - 1, j, half * (fall[0] * rise[0] + fall[1] * rise[1]));
        }
    }
}

// Symmetric pentadiagonal system stored by diagonals.
struct SymBands {
    Vector b0, b1, b2;

    explicit SymBands(Eigen::Index n)
        : b0(Vector::Zero(n)),
          b1(Vector::Zero(std::max<Eigen::Index>(n - 1, 0))),
          b2(Vector::Zero(std::max<Eigen::Index>(n - 2, 0))) {}

    Eigen::Index size() const { return b0.size(); }

    Vector apply(const Vector& v) const {
        const Eigen::Index n = size();
        Vector out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = b0[i] * v[i];
            if (i >= 1) s += b1[i - 1] * v[i - 1];
            if (i >= 2) s += b2[i - 2] * v[i - 2];
            if (i + 1 < n) s += b1[i] * v[i + 1];
            if (i + 2 < n) s += b2[i] * v[i + 2];
            out[i] = s;
        }
        return out;
    }

    Matrix dense() const {
        const Eigen::Index n = size();
        Matrix out = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, i) = b0[i];
            if (i + 1 < n) {
                out(i, i + 1) = out(i + 1, i) = b1[i];
            }
            if (i + 2 < n) {
                out(i, i + 2) = out(i + 2, i) = b2[i];
            }
        }
        return out;
    }
};

// LDL^T factorization and solve for a positive definite pentadiagonal system.
Vector solve_banded(const SymBands& S, const Vector& rhs) {
    const Eigen::Index n = S.size();
    Vector d(n), l1(std::max<Eigen::Index>(n - 1, 0)), l2(std::max<Eigen::Index>(n - 2, 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        double di = S.b0[i];
        if (i >= 1) di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        if (i >= 2) di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        if (!(di > 0.0) || !std::isfinite(di)) {
            throw SingularSystemError("fit_penalized: linear system is not positive definite");
        }
        d[i] = di;
        if (i + 1 < n) {
            double v = S.b1[i];
            if (i >= 1) v -= l1[i - 1] * l2[i - 1] * d[i - 1];
            l1[i] = v / di;
        }
        if (i + 2 < n) {
            l2[i] = S.b2[i] / di;
        }
    }
    Vector z = rhs;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i >= 1) z[i] -= l1[i - 1] * z[i - 1];
        if (i >= 2) z[i] -= l2[i - 2] * z[i - 2];
    }
    z.array() /= d.array();
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        if (i + 1 < n) z[i] -= l1[i] * z[i + 1];
        if (i + 2 < n) z[i] -= l2[i] * z[i + 2];
    }
    return z;
}

constexpr Eigen::Index kDenseSolveCutoff = 64;

Vector solve_system(const SymBands& S, const Vector& rhs) {
    if (S.size() <= kDenseSolveCutoff) {
        Eigen::LDLT<Matrix> ldlt(S.dense());
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw SingularSystemError("fit_penalized: linear system is not positive definite");
        }
        Vector x = ldlt.solve(rhs);
        if (!x.allFinite()) {
            throw SingularSystemError("fit_penalized: linear solve produced non-finite values");
        }
        return x;
    }
    return solve_banded(S, rhs);
}

}  // namespace

Matrix integral_T(const Vector& alpha, const Vector& t) {
    const Eigen::Index m = t.size();
    if (m < 3 || alpha.size() != m - 2) {
        throw InvalidInputError("integral_T: size mismatch");
    }
    Matrix T = Matrix::Zero(m - 2, m - 2);
    accumulate_T(alpha, t, [&](Eigen::Index p, Eigen::Index q, double v) {
        T(p, q) += v;
        if (p != q) T(q, p) += v;
    });
    return T;
}

ConvexSplineLink::ConvexSplineLink(Vector t, Vector values, Vector alpha, double lambda)
    : t_(std::move(t)), m_vals_(std::move(values)), alpha_(std::move(alpha)), lambda_(lambda) {
    const Eigen::Index m = t_.size();
    if (m < 3 || m_vals_.size() != m || alpha_.size() != m - 2) {
        throw InvalidInputError("ConvexSplineLink: size mismatch");
    }
    if (!(lambda_ > 0.0)) {
        throw InvalidInputError("ConvexSplineLink: lambda must be positive");
    }
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        if (!(t_[j] < t_[j + 1])) {
            throw InvalidInputError("ConvexSplineLink: knots must be strictly increasing");
        }
    }

    c_.resize(m - 1);
    piece_start_.resize(static_cast<std::size_t>(m), 0);
    pieces_.reserve(static_cast<std::size_t>(2 * (m - 1)));

    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        piece_start_[static_cast<std::size_t>(j)] = static_cast<int>(pieces_.size());
        double la, lb;
        interval_endpoint_values(t_, alpha_, j, la, lb);
        const double gap = t_[j + 1] - t_[j];
        const double sl = (lb - la) / gap;

        double i1 = 0.0;  // integral of the curvature from t_j
        double i2 = 0.0;  // second running integral from t_j
        const auto push = [&](double x0, double x1, double g0, double slope) {
            if (!(x1 > x0)) return;
            pieces_.push_back({x0, x1, g0, slope, i1, i2});
            const double len = x1 - x0;
            const double g1 = g0 + slope * len;
            i2 += i1 * len + g0 * len * len / 2.0 + slope * len * len * len / 6.0;
            i1 += g0 * len + slope * len * len / 2.0;
            roughness_ += len * (g0 * g0 + g0 * g1 + g1 * g1) / 3.0;
        };

        if (la > 0.0 && lb > 0.0) {
            push(t_[j], t_[j + 1], la, sl);
        } else if (la <= 0.0 && lb <= 0.0) {
            push(t_[j], t_[j + 1], 0.0, 0.0);
        } else {
            const double rho = t_[j] + gap * la / (la - lb);
            if (la > 0.0) {
                push(t_[j], rho, la, sl);
                push(rho, t_[j + 1], 0.0, 0.0);
            } else {
                push(t_[j], rho, 0.0, 0.0);
                push(rho, t_[j + 1], 0.0, sl);
            }
        }

        c_[j] = (m_vals_[j + 1] - m_vals_[j] - i2) / gap;
        if (j + 2 == m) {
            deriv_right_ = c_[j] + i1;
        }
    }
    piece_start_[static_cast<std::size_t>(m - 1)] = static_cast<int>(pieces_.size());
}

Eigen::Index ConvexSplineLink::interval(double s) const {
    const Eigen::Index m = t_.size();
    const auto it = std::upper_bound(t_.data(), t_.data() + m, s);
    const Eigen::Index j = static_cast<Eigen::Index>(it - t_.data()) - 1;
    return std::clamp<Eigen::Index>(j, 0, m - 2);
}

double ConvexSplineLink::value(double s) const {
    const Eigen::Index m = t_.size();
    if (s <= t_[0]) {
        return m_vals_[0] + c_[0] * (s - t_[0]);
    }
    if (s >= t_[m - 1]) {
        return m_vals_[m - 1] + deriv_right_ * (s - t_[m - 1]);
    }
    const Eigen::Index j = interval(s);
    int pi = piece_start_[static_cast<std::size_t>(j)];
    const int pe = piece_start_[static_cast<std::size_t>(j + 1)];
    while (pi + 1 < pe && pieces_[static_cast<std::size_t>(pi + 1)].x0 <= s) {
        ++pi;
    }
    const Piece& pc = pieces_[static_cast<std::size_t>(pi)];
    const double u = s - pc.x0;
    const double d2 = pc.i2 + pc.i1 * u + pc.g0 * u * u / 2.0 + pc.slope * u * u * u / 6.0;
    return m_vals_[j] + c_[j] * (s - t_[j]) + d2;
}

double ConvexSplineLink::derivative(double s) const {
    const Eigen::Index m = t_.size();
    if (s <= t_[0]) {
        return c_[0];
    }
    if (s >= t_[m - 1]) {
        return deriv_right_;
    }
    const Eigen::Index j = interval(s);
    int pi = piece_start_[static_cast<std::size_t>(j)];
    const int pe = piece_start_[static_cast<std::size_t>(j + 1)];
    while (pi + 1 < pe && pieces_[static_cast<std::size_t>(pi + 1)].x0 <= s) {
        ++pi;
    }
    const Piece& pc = pieces_[static_cast<std::size_t>(pi)];
    const double u = s - pc.x0;
    return c_[j] + pc.i1 + pc.g0 * u + pc.slope * u * u / 2.0;
}

double ConvexSplineLink::second_derivative(double s) const {
    const Eigen::Index m = t_.size();
    if (s <= t_[0] || s >= t_[m - 1]) {
        return 0.0;
    }
    const Eigen::Index j = interval(s);
    int pi = piece_start_[static_cast<std::size_t>(j)];
    const int pe = piece_start_[static_cast<std::size_t>(j + 1)];
    while (pi + 1 < pe && pieces_[static_cast<std::size_t>(pi + 1)].x0 <= s) {
        ++pi;
    }
    const Piece& pc = pieces_[static_cast<std::size_t>(pi)];
    return std::max(pc.g0 + pc.slope * (s - pc.x0), 0.0);
}

double ConvexSplineLink::roughness() const {
    return roughness_;
}

ConvexSplineLink fit_penalized(const SortedProjection& proj, double lambda,
                               int max_iter, double tol) {
    const Eigen::Index m = proj.size();
    if (m < 3) {
        throw InvalidInputError("fit_penalized: need at least three bins");
    }
    if (!(lambda > 0.0)) {
        throw InvalidInputError("fit_penalized: lambda must be positive");
    }
    if (max_iter < 1 || !(tol > 0.0)) {
        throw InvalidInputError("fit_penalized: bad iteration controls");
    }

    const Vector& t = proj.t;
    const Vector& ybar = proj.ybar;
    const Vector winv = proj.w.cwiseInverse();
    const double lam2 = lambda * lambda;

    const SecondDiffBands K = build_K(t);
    const Vector ky = K.apply(ybar);
    const double ky_scale = 1.0 + ky.lpNorm<Eigen::Infinity>();
    const Eigen::Index n_sys = m - 2;

    // Penalty part lambda^2 K Q^{-1} K^T, pentadiagonal.
    SymBands penalty(n_sys);
    for (Eigen::Index i = 0; i < n_sys; ++i) {
        penalty.b0[i] = lam2 * (K.d0[i] * K.d0[i] * winv[i] +
                                K.d1[i] * K.d1[i] * winv[i + 1] +
                                K.d2[i] * K.d2[i] * winv[i + 2]);
        if (i + 1 < n_sys) {
            penalty.b1[i] = lam2 * (K.d1[i] * K.d0[i + 1] * winv[i + 1] +
                                    K.d2[i] * K.d1[i + 1] * winv[i + 2]);
        }
        if (i + 2 < n_sys) {
            penalty.b2[i] = lam2 * (K.d2[i] * K.d0[i + 2] * winv[i + 2]);
        }
    }

    const auto system_at = [&](const Vector& alpha) {
        SymBands S = penalty;
        accumulate_T(alpha, t, [&](Eigen::Index p, Eigen::Index q, double v) {
            if (p == q) {
                S.b0[p] += v;
            } else {
                S.b1[p] += v;
            }
        });
        return S;
    };

    // T(alpha) alpha equals the integral of M max(alpha^T M, 0), whose exact
    // almost-everywhere Jacobian is T(alpha) itself. The solve below is
    // therefore a semismooth Newton step on the residual
    //     R(alpha) = [T(alpha) + lambda^2 K Q^{-1} K^T] alpha - K ybar
    // with the symmetric positive definite Jacobian S(alpha), so the step is
    // a descent direction for |R|^2; the damping monitors that norm.
    const auto residual_norm = [&](const Vector& alpha) {
        return (system_at(alpha).apply(alpha) - ky).norm();
    };

    Vector alpha(n_sys);
    for (Eigen::Index i = 0; i < n_sys; ++i) {
        alpha[i] = (t[i + 2] - t[i]) / 4.0;
    }

    bool converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        const SymBands S = system_at(alpha);
        const Vector next = solve_system(S, ky);
        if ((system_at(next).apply(next) - ky).lpNorm<Eigen::Infinity>() <=
            1e-9 * ky_scale) {
            alpha = next;
            converged = true;
            break;
        }
        const double rel_change = (next - alpha).norm() / (1.0 + alpha.norm());
        if (rel_change <= tol) {
            // Pattern still settling at rounding level; take the step and let
            // the residual check above decide on the next pass.
            alpha = next;
            continue;
        }

        const Vector step = next - alpha;
        const double r_old = residual_norm(alpha);
        double gamma = 1.0;
        for (;;) {
            const Vector cand = alpha + gamma * step;
            if (residual_norm(cand) <= r_old * (1.0 - 1e-4 * gamma) + 1e-15 * ky_scale) {
                alpha = cand;
                break;
            }
            gamma *= 0.5;
            if (gamma < 0x1.0p-20) {
                // Ill conditioning can stop the residual from falling all the
                // way to rounding level; accept when it already satisfies the
                // fixed-point contract.
                if ((S.apply(alpha) - ky).lpNorm<Eigen::Infinity>() <= 1e-7 * ky_scale) {
                    converged = true;
                    break;
                }
                throw NonConvergenceError(
                    "fit_penalized: damping floor reached without residual decrease", alpha);
            }
        }
        if (converged) break;
    }
    if (!converged) {
        throw NonConvergenceError("fit_penalized: iteration cap exceeded", alpha);
    }

    const Vector m_vals = ybar - lam2 * winv.cwiseProduct(K.apply_transpose(alpha));
    return ConvexSplineLink(t, m_vals, alpha, lambda);
}

double eval_spline(const ConvexSplineLink& link, double s) {
    return link.value(s);
}

double spline_derivative(const ConvexSplineLink& link, double s) {
    return link.derivative(s);
}

}  // namespace cvxsim
