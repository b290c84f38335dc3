#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxsim/affine_link.hpp"
#include "cvxsim/qp.hpp"
#include "cvxsim/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace cvxsim;

namespace {

SortedProjection make_proj(std::initializer_list<double> t, std::initializer_list<double> y,
                           std::initializer_list<double> w) {
    SortedProjection proj;
    proj.t = Vector(static_cast<Eigen::Index>(t.size()));
    proj.ybar = Vector(static_cast<Eigen::Index>(y.size()));
    proj.w = Vector(static_cast<Eigen::Index>(w.size()));
    Eigen::Index i = 0;
    for (double v : t) proj.t[i++] = v;
    i = 0;
    for (double v : y) proj.ybar[i++] = v;
    i = 0;
    for (double v : w) proj.w[i++] = v;
    return proj;
}

double weighted_objective(const SortedProjection& proj, const Vector& fit) {
    return (fit - proj.ybar).cwiseAbs2().dot(proj.w);
}

}  // namespace

TEST_CASE("fit_lipschitz leaves feasible data untouched") {
    const auto proj = make_proj({1, 2, 3}, {1, 0, 1}, {1, 1, 1});
    const auto link = fit_lipschitz(proj, 1.0);
    CHECK((link.m_vals - proj.ybar).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(link.lipschitz_bound.has_value());
}

TEST_CASE("fit_lipschitz flattens a concave bump") {
    const auto proj = make_proj({1, 2, 3}, {0, 1, 0}, {1, 1, 1});
    const auto link = fit_lipschitz(proj, 10.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(link.m_vals[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    }
}

TEST_CASE("fit_lipschitz clips a steep two-point slope") {
    const auto proj = make_proj({0, 1}, {0, 5}, {1, 1});
    const auto link = fit_lipschitz(proj, 1.0);
    // Slope pinned at 1 and the weighted mean preserved: values (2, 3).
    CHECK(link.m_vals[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(link.m_vals[1] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("fit_convex keeps convex data and flattens the bump") {
    const auto convex = make_proj({-2, -1, 0, 1, 2}, {3, 1, 0, 1, 3}, {1, 1, 1, 1, 1});
    const auto link = fit_convex(convex);
    CHECK((link.m_vals - convex.ybar).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_FALSE(link.lipschitz_bound.has_value());

    const auto bump = make_proj({1, 2, 3}, {0, 1, 0}, {1, 1, 1});
    const auto flat = fit_convex(bump);
    for (int j = 0; j < 3; ++j) {
        CHECK(flat.m_vals[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    }
}

TEST_CASE("eval_affine interpolates and extrapolates linearly") {
    const PiecewiseAffineLink line(Vector{{0, 1}}, Vector{{0, 1}});
    CHECK(eval_affine(line, 0.5) == doctest::Approx(0.5));
    CHECK(eval_affine(line, 2.0) == doctest::Approx(2.0));

    const PiecewiseAffineLink vee(Vector{{0, 1, 2}}, Vector{{1, 0, 1}});
    CHECK(eval_affine(vee, -1.0) == doctest::Approx(2.0));

    const PiecewiseAffineLink constant(Vector{{3}}, Vector{{7}});
    CHECK(eval_affine(constant, -10.0) == doctest::Approx(7.0));
}

TEST_CASE("right_derivative picks the segment to the right") {
    const PiecewiseAffineLink link(Vector{{0, 1, 2}}, Vector{{0, 0, 1}});
    CHECK(right_derivative(link, 0.5) == doctest::Approx(0.0));
    CHECK(right_derivative(link, 1.0) == doctest::Approx(1.0));
    CHECK(right_derivative(link, 1.7) == doctest::Approx(1.0));
    CHECK(right_derivative(link, -5.0) == doctest::Approx(0.0));
    CHECK(right_derivative(link, 5.0) == doctest::Approx(1.0));

    const PiecewiseAffineLink constant(Vector{{3}}, Vector{{7}});
    CHECK_THROWS_AS(right_derivative(constant, 0.0), InvalidInputError);
}

TEST_CASE("fitted links satisfy the residual-sum identity") {
    Xoshiro256pp rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 3 + static_cast<int>(rng.next() % 20);
        const auto proj = testing::random_projection(rng, m);
        const double n = proj.w.sum();
        for (const auto& link : {fit_convex(proj), fit_lipschitz(proj, 2.0)}) {
            const double s = proj.w.dot(proj.ybar - link.m_vals);
            CHECK(std::abs(s) <= 1e-8 * n);
        }
    }
}

TEST_CASE("fit objective is monotone in the slope bound") {
    Xoshiro256pp rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const auto proj = testing::random_projection(rng, 8);
        double prev = std::numeric_limits<double>::infinity();
        for (double L : {0.5, 1.0, 2.0, 8.0}) {
            const double obj = weighted_objective(proj, fit_lipschitz(proj, L).m_vals);
            CHECK(obj <= prev + 1e-9 * (1.0 + prev));
            prev = obj;
        }
    }
}

TEST_CASE("a huge slope bound reproduces the unbounded convex fit") {
    Xoshiro256pp rng(4242);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 3 + static_cast<int>(rng.next() % 28);
        const auto proj = testing::random_projection(rng, m);
        const auto bounded = fit_lipschitz(proj, 1e6);
        const auto unbounded = fit_convex(proj);
        CHECK((bounded.m_vals - unbounded.m_vals).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("both fits match exhaustive active-set search on small instances") {
    Xoshiro256pp rng(1001);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 3 + static_cast<int>(rng.next() % 4);  // up to 6
        const auto proj = testing::random_projection(rng, m);

        {
            Matrix A = Matrix::Zero(m - 2, m);
            Vector b = Vector::Zero(m - 2);
            for (int j = 0; j + 2 < m; ++j) {
                const double dl = proj.t[j + 1] - proj.t[j];
                const double dr = proj.t[j + 2] - proj.t[j + 1];
                A(j, j) = 1.0 / dl;
                A(j, j + 1) = -1.0 / dl - 1.0 / dr;
                A(j, j + 2) = 1.0 / dr;
            }
            const Vector oracle =
                testing::brute_force_constrained_lsq(proj, LinearConstraints(A, b));
            const auto link = fit_convex(proj);
            CHECK((link.m_vals - oracle).cwiseAbs().maxCoeff() <= 1e-6);
        }

        {
            const double L = 1.0;
            Matrix A = Matrix::Zero(m, m);
            Vector b = Vector::Zero(m);
            const double d0 = proj.t[1] - proj.t[0];
            A(0, 0) = -1.0 / d0;
            A(0, 1) = 1.0 / d0;
            b[0] = -L;
            for (int j = 0; j + 2 < m; ++j) {
                const double dl = proj.t[j + 1] - proj.t[j];
                const double dr = proj.t[j + 2] - proj.t[j + 1];
                A(j + 1, j) = 1.0 / dl;
                A(j + 1, j + 1) = -1.0 / dl - 1.0 / dr;
                A(j + 1, j + 2) = 1.0 / dr;
            }
            const double dm = proj.t[m - 1] - proj.t[m - 2];
            A(m - 1, m - 2) = 1.0 / dm;
            A(m - 1, m - 1) = -1.0 / dm;
            b[m - 1] = -L;
            const Vector oracle =
                testing::brute_force_constrained_lsq(proj, LinearConstraints(A, b));
            const auto link = fit_lipschitz(proj, L);
            CHECK((link.m_vals - oracle).cwiseAbs().maxCoeff() <= 1e-6);
        }
    }
}

TEST_CASE("slope bound is honored everywhere") {
    Xoshiro256pp rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto proj = testing::random_projection(rng, 10);
        const double L = 0.7;
        const auto link = fit_lipschitz(proj, L);
        for (double s = proj.t[0] - 2.0; s <= proj.t[9] + 2.0; s += 0.05) {
            CHECK(std::abs(right_derivative(link, s)) <= L + 1e-8);
        }
        CHECK(right_derivative(link, proj.t[0]) <=
              right_derivative(link, proj.t[9]) + 1e-12);
    }
}
