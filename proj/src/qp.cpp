#include "cvxsim/qp.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace cvxsim {

LinearConstraints::LinearConstraints(Matrix A_in, Vector b_in)
    : A(std::move(A_in)), b(std::move(b_in)) {
    if (A.rows() < 1) {
        throw InvalidInputError("LinearConstraints: need at least one constraint row");
    }
    if (b.size() != A.rows()) {
        throw InvalidInputError("LinearConstraints: right-hand side length mismatch");
    }
    if (!A.allFinite() || !b.allFinite()) {
        throw InvalidInputError("LinearConstraints: entries must be finite");
    }
}

namespace {

// Plane rotation [c s; -s c] mapping (a, b) to (r, 0).
struct Givens {
    double c;
    double s;
    double r;
};

Givens make_givens(double a, double b) {
    if (std::abs(a) > std::abs(b)) {
        const double xr = b / a;
        const double yr = std::sqrt(1.0 + xr * xr);
        const double c = std::copysign(1.0 / yr, a);
        return {c, c * xr, std::abs(a) * yr};
    }
    if (b != 0.0) {
        const double xr = a / b;
        const double yr = std::sqrt(1.0 + xr * xr);
        const double s = std::copysign(1.0 / yr, b);
        return {s * xr, s, std::abs(b) * yr};
    }
    return {1.0, 0.0, a};
}

}  // namespace

Vector nnls(const Matrix& E, const Vector& l, double tol) {
    const Eigen::Index p = E.rows();
    const Eigen::Index q = E.cols();
    if (p < 1 || q < 1) {
        throw InvalidInputError("nnls: empty problem");
    }
    if (l.size() != p) {
        throw InvalidInputError("nnls: right-hand side length mismatch");
    }
    if (!(tol > 0.0)) {
        throw InvalidInputError("nnls: tol must be positive");
    }

    Matrix A = E;   // transformed in place by the orthogonal updates
    Vector b = l;   // transformed right-hand side
    Vector x = Vector::Zero(q);
    Vector z = Vector::Zero(q);
    Vector zz(p);
    Vector wdual = Vector::Zero(q);
    std::vector<Eigen::Index> index(static_cast<std::size_t>(q));
    std::iota(index.begin(), index.end(), Eigen::Index{0});

    Eigen::Index nsetp = 0;
    const long outer_cap = 3 * static_cast<long>(q) + 3;
    const long inner_cap = 10 * static_cast<long>(q) + 20;
    long outer = 0;
    long inner = 0;

    // Back substitution through the triangularized passive columns.
    const auto solve_passive = [&]() {
        for (Eigen::Index i = nsetp - 1; i >= 0; --i) {
            double sum = b[i];
            for (Eigen::Index ii = i + 1; ii < nsetp; ++ii) {
                sum -= A(i, index[static_cast<std::size_t>(ii)]) * z[ii];
            }
            z[i] = sum / A(i, index[static_cast<std::size_t>(i)]);
        }
    };

    while (nsetp < q && nsetp < p) {
        if (++outer > outer_cap) {
            throw NonConvergenceError("nnls: outer iteration cap exceeded", x);
        }

        // Duals of the zero set. The passive fit consumed b's first nsetp
        // rows, so the residual lives entirely in rows nsetp..p-1.
        for (Eigen::Index iz = nsetp; iz < q; ++iz) {
            const Eigen::Index j = index[static_cast<std::size_t>(iz)];
            wdual[j] = A.col(j).tail(p - nsetp).dot(b.tail(p - nsetp));
        }

        // Pick the entering column, rejecting candidates whose pivot would be
        // negligible or whose tentative new coordinate is nonpositive.
        Eigen::Index enter_pos = -1;
        double alpha_piv = 0.0;
        for (;;) {
            Eigen::Index best_pos = -1;
            Eigen::Index best_col = -1;
            double best_w = tol;
            for (Eigen::Index iz = nsetp; iz < q; ++iz) {
                const Eigen::Index j = index[static_cast<std::size_t>(iz)];
                if (wdual[j] > best_w || (wdual[j] == best_w && best_col >= 0 && j < best_col)) {
                    best_w = wdual[j];
                    best_pos = iz;
                    best_col = j;
                }
            }
            if (best_pos < 0) {
                return x;  // KKT satisfied at tol
            }

            const Eigen::Index j = best_col;
            const double sigma = A.col(j).tail(p - nsetp).norm();
            const double a0 = A(nsetp, j);
            if (sigma == 0.0) {
                wdual[j] = 0.0;
                continue;
            }
            const double alpha = (a0 > 0.0) ? -sigma : sigma;
            const double unorm = A.col(j).head(nsetp).norm();
            if ((unorm + 0.01 * std::abs(alpha)) - unorm <= 0.0) {
                wdual[j] = 0.0;  // near linear dependence with the passive set
                continue;
            }
            // Tentative reflector applied to a copy of b; accept only if the
            // entering coordinate would be positive.
            const double vhead = a0 - alpha;
            const Eigen::Index tail = p - nsetp - 1;
            const double vsq = vhead * vhead + A.col(j).tail(tail).squaredNorm();
            zz = b;
            double coef = vhead * zz[nsetp];
            if (tail > 0) {
                coef += A.col(j).tail(tail).dot(zz.tail(tail));
            }
            coef *= 2.0 / vsq;
            zz[nsetp] -= coef * vhead;
            if (tail > 0) {
                zz.tail(tail) -= coef * A.col(j).tail(tail);
            }
            if (zz[nsetp] / alpha <= 0.0) {
                wdual[j] = 0.0;
                continue;
            }

            // Accept: commit the reflector to b and to the other zero-set columns.
            b = zz;
            for (Eigen::Index iz = nsetp; iz < q; ++iz) {
                const Eigen::Index jj = index[static_cast<std::size_t>(iz)];
                if (jj == j) continue;
                double c2 = vhead * A(nsetp, jj);
                if (tail > 0) {
                    c2 += A.col(j).tail(tail).dot(A.col(jj).tail(tail));
                }
                c2 *= 2.0 / vsq;
                A(nsetp, jj) -= c2 * vhead;
                if (tail > 0) {
                    A.col(jj).tail(tail) -= c2 * A.col(j).tail(tail);
                }
            }
            A(nsetp, j) = alpha;
            A.col(j).tail(tail).setZero();
            std::swap(index[static_cast<std::size_t>(best_pos)],
                      index[static_cast<std::size_t>(nsetp)]);
            enter_pos = nsetp;
            alpha_piv = alpha;
            ++nsetp;
            break;
        }
        (void)enter_pos;
        (void)alpha_piv;

        solve_passive();

        // Restore feasibility of the passive coordinates.
        for (;;) {
            if (++inner > inner_cap) {
                throw NonConvergenceError("nnls: inner iteration cap exceeded", x);
            }
            Eigen::Index which = -1;
            double step = 2.0;
            for (Eigen::Index i = 0; i < nsetp; ++i) {
                if (z[i] <= 0.0) {
                    const Eigen::Index j = index[static_cast<std::size_t>(i)];
                    const double tt = x[j] / (x[j] - z[i]);
                    if (tt < step) {
                        step = tt;
                        which = i;
                    }
                }
            }
            if (which < 0) {
                for (Eigen::Index i = 0; i < nsetp; ++i) {
                    x[index[static_cast<std::size_t>(i)]] = z[i];
                }
                break;
            }

            for (Eigen::Index i = 0; i < nsetp; ++i) {
                const Eigen::Index j = index[static_cast<std::size_t>(i)];
                x[j] += step * (z[i] - x[j]);
            }
            x[index[static_cast<std::size_t>(which)]] = 0.0;

            // Remove coordinates pinned at zero, retriangularizing with plane
            // rotations; roundoff can pin more than the blocking one.
            for (;;) {
                const Eigen::Index removed = index[static_cast<std::size_t>(which)];
                for (Eigen::Index pos = which + 1; pos < nsetp; ++pos) {
                    const Eigen::Index jj = index[static_cast<std::size_t>(pos)];
                    index[static_cast<std::size_t>(pos - 1)] = jj;
                    const Givens g = make_givens(A(pos - 1, jj), A(pos, jj));
                    A(pos - 1, jj) = g.r;
                    A(pos, jj) = 0.0;
                    for (Eigen::Index col = 0; col < q; ++col) {
                        if (col == jj) continue;
                        const double v1 = A(pos - 1, col);
                        const double v2 = A(pos, col);
                        A(pos - 1, col) = g.c * v1 + g.s * v2;
                        A(pos, col) = -g.s * v1 + g.c * v2;
                    }
                    const double b1 = b[pos - 1];
                    const double b2 = b[pos];
                    b[pos - 1] = g.c * b1 + g.s * b2;
                    b[pos] = -g.s * b1 + g.c * b2;
                }
                --nsetp;
                index[static_cast<std::size_t>(nsetp)] = removed;

                which = -1;
                for (Eigen::Index i = 0; i < nsetp; ++i) {
                    if (x[index[static_cast<std::size_t>(i)]] <= 0.0) {
                        x[index[static_cast<std::size_t>(i)]] = 0.0;
                        which = i;
                        break;
                    }
                }
                if (which < 0) break;
            }

            solve_passive();
        }
    }
    return x;
}

Vector ldp(const Matrix& G, const Vector& h, double tol) {
    const Eigen::Index k = G.rows();
    const Eigen::Index m = G.cols();
    if (h.size() != k) {
        throw InvalidInputError("ldp: right-hand side length mismatch");
    }
    Matrix E(m + 1, k);
    E.topRows(m) = G.transpose();
    E.row(m) = h.transpose();
    Vector l = Vector::Zero(m + 1);
    l[m] = 1.0;

    const Vector u = nnls(E, l, tol);
    const Vector r = E * u - l;
    if (std::abs(r[m]) < 1e-12) {
        throw InfeasibleConstraintsError("ldp: constraint set is infeasible");
    }
    return -r.head(m) / r[m];
}

Vector constrained_lsq(const SortedProjection& proj, const LinearConstraints& cons) {
    const Eigen::Index m = proj.size();
    if (cons.cols() != m) {
        throw InvalidInputError("constrained_lsq: constraint columns do not match bins");
    }
    if ((proj.w.array() <= 0.0).any()) {
        throw InvalidInputError("constrained_lsq: bin weights must be positive");
    }

    // The unconstrained minimizer is ybar itself; keep it when feasible.
    if (((cons.A * proj.ybar - cons.b).array() >= 0.0).all()) {
        return proj.ybar;
    }

    const Vector qinv_half = proj.w.cwiseSqrt().cwiseInverse();
    const Matrix G = cons.A * qinv_half.asDiagonal();
    const Vector h = cons.b - cons.A * proj.ybar;
    const Vector z = ldp(G, h);
    return proj.ybar + qinv_half.cwiseProduct(z);
}

}  // namespace cvxsim
