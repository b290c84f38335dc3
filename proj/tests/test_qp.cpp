#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxsim/qp.hpp"
#include "cvxsim/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace cvxsim;

namespace {

// Largest KKT violation of a nonnegative least squares candidate.
double nnls_kkt_residual(const Matrix& E, const Vector& l, const Vector& u) {
    const Vector w = E.transpose() * (l - E * u);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        worst = std::max(worst, w[j]);              // duals must be <= 0
        if (u[j] > 0.0) {
            worst = std::max(worst, std::abs(w[j]));  // and vanish on the support
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("nnls clamps the unconstrained solution coordinatewise for identity") {
    Matrix E = Matrix::Identity(2, 2);
    Vector l(2);
    l << 1, -1;
    const Vector u = nnls(E, l);
    CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u[1] == doctest::Approx(0.0));
}

TEST_CASE("nnls single column reduces to a mean") {
    Matrix E(2, 1);
    E << 1, 1;
    Vector l(2);
    l << 1, 2;
    const Vector u = nnls(E, l);
    CHECK(u[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("nnls derived instance matches grid search and satisfies KKT") {
    Matrix E(2, 2);
    E << 1, 1, 0, 1;
    Vector l(2);
    l << 2, -1;
    const Vector u = nnls(E, l);
    // Expected value frozen from the dense grid oracle (and hand KKT):
    // u = (2, 0), with duals (0, -1).
    const Vector grid = testing::nnls_grid_2d(E, l, 4.0, 1e-3);
    CHECK((u - grid).cwiseAbs().maxCoeff() <= 2e-3);
    CHECK(u[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(u[1] == doctest::Approx(0.0));
    CHECK(nnls_kkt_residual(E, l, u) <= 1e-8);
}

TEST_CASE("nnls satisfies the KKT conditions on random instances") {
    Xoshiro256pp rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const int p = 1 + static_cast<int>(rng.next() % 12);
        const int q = 1 + static_cast<int>(rng.next() % 12);
        Matrix E(p, q);
        Vector l(p);
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j < q; ++j) E(i, j) = rng.normal();
            l[i] = 3.0 * rng.normal();
        }
        const Vector u = nnls(E, l);
        CHECK((u.array() >= 0.0).all());
        CHECK(nnls_kkt_residual(E, l, u) <= 1e-8);
    }
}

TEST_CASE("ldp half-line examples") {
    Matrix G(1, 1);
    Vector h(1);

    G << 1;
    h << -1;
    CHECK(ldp(G, h)[0] == doctest::Approx(0.0));

    h << 2;
    CHECK(ldp(G, h)[0] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("ldp projects the origin onto a quadrant corner") {
    Matrix G = Matrix::Identity(2, 2);
    Vector h(2);
    h << 1, 1;
    const Vector z = ldp(G, h);
    const Vector oracle = testing::ldp_dual_pg(G, h);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((z - oracle).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("ldp detects infeasible constraints") {
    Matrix G(2, 1);
    G << 1, -1;
    Vector h(2);
    h << 1, 1;  // z >= 1 and -z >= 1
    CHECK_THROWS_AS(ldp(G, h), InfeasibleConstraintsError);
}

TEST_CASE("ldp agrees with the dual projected-gradient oracle on random instances") {
    Xoshiro256pp rng(5150);
    int done = 0;
    while (done < 200) {
        const int k = 1 + static_cast<int>(rng.next() % 8);
        const int m = 1 + static_cast<int>(rng.next() % 8);
        Matrix G(k, m);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < m; ++j) G(i, j) = rng.normal();
        }
        // Feasible by construction: h = G z0 - slack with some tight rows.
        Vector z0(m);
        for (int j = 0; j < m; ++j) z0[j] = rng.normal();
        Vector h = G * z0;
        for (int i = 0; i < k; ++i) {
            if (rng.uniform01() < 0.5) h[i] -= rng.uniform(0.0, 1.0);
        }
        const Vector z = ldp(G, h);
        const Vector oracle = testing::ldp_dual_pg(G, h);
        CHECK((z - oracle).cwiseAbs().maxCoeff() <= 1e-6);

        const double h_scale = 1.0 + h.cwiseAbs().maxCoeff();
        CHECK(((G * z - h).array() >= -1e-8 * h_scale).all());
        ++done;
    }
}

TEST_CASE("constrained_lsq returns ybar when it is interior") {
    SortedProjection proj;
    proj.t = Vector{{1, 2, 3}};
    proj.ybar = Vector{{1, 0, 1}};
    proj.w = Vector{{1, 1, 1}};
    Matrix A(1, 3);
    A << 1, -2, 1;  // convexity
    Vector b = Vector::Zero(1);
    const Vector fit = constrained_lsq(proj, LinearConstraints(A, b));
    CHECK((fit - proj.ybar).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constrained_lsq flattens a concave bump to its mean") {
    SortedProjection proj;
    proj.t = Vector{{1, 2, 3}};
    proj.ybar = Vector{{0, 1, 0}};
    proj.w = Vector{{1, 1, 1}};
    Matrix A(1, 3);
    A << 1, -2, 1;
    Vector b = Vector::Zero(1);
    const Vector fit = constrained_lsq(proj, LinearConstraints(A, b));
    // Hand solution: the single active constraint gives (1/3, 1/3, 1/3).
    CHECK(fit[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(fit[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(fit[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("constrained_lsq matches exhaustive active-set search on random instances") {
    Xoshiro256pp rng(808);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 2 + static_cast<int>(rng.next() % 5);
        const int k = 1 + static_cast<int>(rng.next() % 6);
        SortedProjection proj = testing::random_projection(rng, m);
        Matrix A(k, m);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < m; ++j) A(i, j) = rng.normal();
        }
        Vector interior(m);
        for (int j = 0; j < m; ++j) interior[j] = rng.normal();
        Vector b = A * interior;
        for (int i = 0; i < k; ++i) b[i] -= rng.uniform(0.0, 0.5);
        const LinearConstraints cons(A, b);

        const Vector fit = constrained_lsq(proj, cons);
        const Vector oracle = testing::brute_force_constrained_lsq(proj, cons);
        const double obj_fit = (fit - proj.ybar).cwiseAbs2().dot(proj.w);
        const double obj_oracle = (oracle - proj.ybar).cwiseAbs2().dot(proj.w);
        CHECK(obj_fit <= obj_oracle + 1e-6 * (1.0 + obj_oracle));
        CHECK((fit - oracle).cwiseAbs().maxCoeff() <= 1e-5 * (1.0 + oracle.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("constrained_lsq output is locally optimal among feasible perturbations") {
    Xoshiro256pp rng(313);
    SortedProjection proj = testing::random_projection(rng, 8);
    Matrix A(6, 8);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 8; ++j) A(i, j) = rng.normal();
    }
    Vector b = A * proj.ybar;
    for (int i = 0; i < 6; ++i) b[i] -= rng.uniform(0.1, 1.0);
    // Make it binding by shifting two rows.
    b[0] += rng.uniform(0.5, 2.0);
    b[1] += rng.uniform(0.5, 2.0);
    const LinearConstraints cons(A, b);
    Vector fit;
    try {
        fit = constrained_lsq(proj, cons);
    } catch (const InfeasibleConstraintsError&) {
        return;  // shifted system may be empty; nothing to test then
    }
    const double obj_fit = (fit - proj.ybar).cwiseAbs2().dot(proj.w);
    int tested = 0;
    for (int trial = 0; trial < 5000 && tested < 1000; ++trial) {
        Vector delta(8);
        for (int j = 0; j < 8; ++j) delta[j] = 0.3 * rng.normal();
        const Vector cand = fit + delta;
        if (((A * cand - b).array() < 0.0).any()) continue;
        ++tested;
        const double obj_cand = (cand - proj.ybar).cwiseAbs2().dot(proj.w);
        CHECK(obj_fit <= obj_cand + 1e-9);
    }
}
