#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvxsim/rng.hpp"
#include "cvxsim/types.hpp"

#include <cmath>

using namespace cvxsim;

TEST_CASE("inverse normal cdf reproduces reference quantiles") {
    // Reference values from standard tables.
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(inverse_normal_cdf(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-9));
    CHECK(inverse_normal_cdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-8));
    CHECK(inverse_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-9));
    CHECK_THROWS_AS(inverse_normal_cdf(0.0), InvalidInputError);
    CHECK_THROWS_AS(inverse_normal_cdf(1.0), InvalidInputError);
}

TEST_CASE("inverse normal cdf is antisymmetric") {
    for (double p : {0.01, 0.1, 0.3, 0.42, 0.49}) {
        CHECK(inverse_normal_cdf(p) ==
              doctest::Approx(-inverse_normal_cdf(1.0 - p)).epsilon(1e-12));
    }
}

TEST_CASE("generator streams are deterministic in the seed") {
    Xoshiro256pp a(123456789), b(123456789), c(123456790);
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        if (va != b.next()) all_equal = false;
        if (va != c.next()) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform draws stay strictly inside the interval") {
    Xoshiro256pp rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-1.0, 5.0);
        CHECK(u > -1.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    Xoshiro256pp rng(2024);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("child seeds differ across indices and masters") {
    CHECK(child_seed(1, 0) != child_seed(1, 1));
    CHECK(child_seed(1, 0) != child_seed(2, 0));
    CHECK(child_seed(1, 5) == child_seed(1, 5));
}
