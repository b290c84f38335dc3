#include "oracles.hpp"

#include "cvxsim/spline_link.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace cvxsim::testing {

Vector brute_force_constrained_lsq(const SortedProjection& proj,
                                   const LinearConstraints& cons) {
    const Eigen::Index m = proj.size();
    const Eigen::Index k = cons.rows();
    if (k > 20) {
        throw InvalidInputError("brute_force_constrained_lsq: too many constraints");
    }
    const Vector& y = proj.ybar;
    const Vector& w = proj.w;
    const double b_scale = 1.0 + cons.b.cwiseAbs().maxCoeff();

    double best_obj = std::numeric_limits<double>::infinity();
    Vector best = y;

    for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index r = 0; r < k; ++r) {
            if (mask & (1ULL << r)) active.push_back(r);
        }
        const Eigen::Index na = static_cast<Eigen::Index>(active.size());

        // KKT system of: minimize (m-y)^T Q (m-y) subject to A_S m = b_S.
        Matrix kkt = Matrix::Zero(m + na, m + na);
        Vector rhs(m + na);
        for (Eigen::Index i = 0; i < m; ++i) {
            kkt(i, i) = 2.0 * w[i];
            rhs[i] = 2.0 * w[i] * y[i];
        }
        for (Eigen::Index a = 0; a < na; ++a) {
            const Eigen::Index r = active[static_cast<std::size_t>(a)];
            kkt.block(m + a, 0, 1, m) = cons.A.row(r);
            kkt.block(0, m + a, m, 1) = cons.A.row(r).transpose();
            rhs[m + a] = cons.b[r];
        }
        const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        if (!sol.allFinite()) continue;
        if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
            continue;  // singular subset
        }
        const Vector cand = sol.head(m);
        if (((cons.A * cand - cons.b).array() < -1e-9 * b_scale).any()) {
            continue;
        }
        const double obj = (cand - y).cwiseAbs2().dot(w);
        if (obj < best_obj) {
            best_obj = obj;
            best = cand;
        }
    }
    return best;
}

Vector ldp_dual_pg(const Matrix& G, const Vector& h, int iters) {
    const Eigen::Index k = G.rows();
    const Matrix gram = G * G.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const double lip = std::max(eig.eigenvalues().maxCoeff(), 1e-12);

    Vector u = Vector::Zero(k);
    Vector v = u;
    double t = 1.0;
    for (int it = 0; it < iters; ++it) {
        const Vector grad = gram * v - h;
        Vector u_next = (v - grad / lip).cwiseMax(0.0);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = u_next + ((t - 1.0) / t_next) * (u_next - u);
        u = std::move(u_next);
        t = t_next;
    }
    return G.transpose() * u;
}

Vector nnls_grid_2d(const Matrix& E, const Vector& l, double hi, double step) {
    if (E.cols() != 2) {
        throw InvalidInputError("nnls_grid_2d: expects two columns");
    }
    Vector best(2);
    double best_obj = std::numeric_limits<double>::infinity();
    for (double u1 = 0.0; u1 <= hi; u1 += step) {
        for (double u2 = 0.0; u2 <= hi; u2 += step) {
            const double obj = (E.col(0) * u1 + E.col(1) * u2 - l).squaredNorm();
            if (obj < best_obj) {
                best_obj = obj;
                best << u1, u2;
            }
        }
    }
    return best;
}

namespace {

// Breakpoints of s -> alpha^T M(s) inside [a, b]: scan for sign changes, then
// bisect each bracket.
std::vector<double> sign_change_points(const Vector& alpha, const Vector& t, double a,
                                       double b) {
    const auto phi = [&](double s) { return alpha.dot(basis_M(t, s)); };
    std::vector<double> out;
    const int scan = 512;
    double prev_s = a;
    double prev_v = phi(a);
    for (int i = 1; i <= scan; ++i) {
        const double s = a + (b - a) * i / scan;
        const double v = phi(s);
        if ((prev_v > 0.0) != (v > 0.0)) {
            double lo = prev_s, hi_ = s;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi_);
                if ((phi(mid) > 0.0) == (prev_v > 0.0)) {
                    lo = mid;
                } else {
                    hi_ = mid;
                }
            }
            out.push_back(0.5 * (lo + hi_));
        }
        prev_s = s;
        prev_v = v;
    }
    return out;
}

}  // namespace

Matrix integral_T_quadrature(const Vector& alpha, const Vector& t, int panels) {
    const Eigen::Index m = t.size();
    Matrix T = Matrix::Zero(m - 2, m - 2);
    const auto phi = [&](double s) { return alpha.dot(basis_M(t, s)); };

    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        std::vector<double> cuts{t[j]};
        for (double r : sign_change_points(alpha, t, t[j], t[j + 1])) {
            cuts.push_back(r);
        }
        cuts.push_back(t[j + 1]);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c];
            const double b = cuts[c + 1];
            if (!(b > a) || phi(0.5 * (a + b)) <= 0.0) continue;
            const int np = (panels % 2 == 0) ? panels : panels + 1;
            const double h = (b - a) / np;
            for (int i = 0; i <= np; ++i) {
                const double s = a + h * i;
                const double wgt = (i == 0 || i == np) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                const Vector mv = basis_M(t, s);
                for (Eigen::Index p = 0; p < m - 2; ++p) {
                    if (mv[p] == 0.0) continue;
                    for (Eigen::Index q = p; q < m - 2; ++q) {
                        if (mv[q] == 0.0) continue;
                        T(p, q) += wgt * h / 3.0 * mv[p] * mv[q];
                    }
                }
            }
        }
    }
    for (Eigen::Index p = 0; p < m - 2; ++p) {
        for (Eigen::Index q = p + 1; q < m - 2; ++q) {
            T(q, p) = T(p, q);
        }
    }
    return T;
}

std::pair<double, double> wls_line(const Vector& t, const Vector& y, const Vector& w) {
    Matrix design(t.size(), 2);
    design.col(0).setOnes();
    design.col(1) = t;
    const Vector sq = w.cwiseSqrt();
    const Vector beta = (sq.asDiagonal() * design)
                            .colPivHouseholderQr()
                            .solve(sq.cwiseProduct(y));
    return {beta[0], beta[1]};
}

double convex_spline_objective(const Vector& t, const Vector& ybar, const Vector& w,
                               double lambda, const Vector& alpha) {
    const Eigen::Index m = t.size();
    const auto phi = [&](double s) { return alpha.dot(basis_M(t, s)); };

    // Exact double integration of max(phi, 0) knot by knot, splitting each
    // interval at the sign changes so Simpson on the pieces is exact.
    Vector g2_at_knot(m);
    g2_at_knot[0] = 0.0;
    double g1 = 0.0, g2 = 0.0, j_sq = 0.0;
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        std::vector<double> cuts{t[j]};
        for (double r : sign_change_points(alpha, t, t[j], t[j + 1])) {
            cuts.push_back(r);
        }
        cuts.push_back(t[j + 1]);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c];
            const double b = cuts[c + 1];
            if (!(b > a)) continue;
            const double mid = 0.5 * (a + b);
            if (phi(mid) <= 0.0) {
                g2 += g1 * (b - a);
                continue;
            }
            const double ga = std::max(phi(a), 0.0);
            const double gb = std::max(phi(b), 0.0);
            const double len = b - a;
            const double slope = (gb - ga) / len;
            g2 += g1 * len + ga * len * len / 2.0 + slope * len * len * len / 6.0;
            g1 += ga * len + slope * len * len / 2.0;
            j_sq += len * (ga * ga + ga * gb + gb * gb) / 3.0;
        }
        g2_at_knot[j + 1] = g2;
    }

    Matrix design(m, 2);
    design.col(0).setOnes();
    design.col(1) = t;
    const Vector z = ybar - g2_at_knot;
    const Vector sq = w.cwiseSqrt();
    const Vector beta = (sq.asDiagonal() * design)
                            .colPivHouseholderQr()
                            .solve(sq.cwiseProduct(z));
    const double sse = sq.cwiseProduct(z - design * beta).squaredNorm();
    return sse + lambda * lambda * j_sq;
}

SortedProjection random_projection(Xoshiro256pp& rng, int m, bool convex_data) {
    SortedProjection proj;
    proj.t.resize(m);
    proj.ybar.resize(m);
    proj.w.resize(m);
    double pos = rng.uniform(-1.0, 1.0);
    for (int j = 0; j < m; ++j) {
        proj.t[j] = pos;
        pos += rng.uniform(0.05, 1.0);
    }
    if (convex_data) {
        const double a = rng.uniform(0.1, 2.0);
        const double b = rng.uniform(-1.0, 1.0);
        const double c = rng.uniform(-1.0, 1.0);
        const double center = proj.t.mean();
        for (int j = 0; j < m; ++j) {
            const double u = proj.t[j] - center;
            proj.ybar[j] = a * u * u + b * u + c + 0.1 * rng.normal();
        }
    } else {
        for (int j = 0; j < m; ++j) {
            proj.ybar[j] = rng.normal();
        }
    }
    for (int j = 0; j < m; ++j) {
        proj.w[j] = static_cast<double>(1 + (rng.next() % 4));
    }
    proj.map.assign(static_cast<std::size_t>(m), 0);
    return proj;
}

}  // namespace cvxsim::testing
