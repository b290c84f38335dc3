#pragma once

#include <cstdint>

namespace cvxsim {

/// SplitMix64 output function; also used to hash seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent child seed from a master seed and a stream index.
/// Used to give each replication (or random start) its own reproducible stream.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index);

/// Inverse of the standard normal CDF (Wichura's rational approximation,
/// absolute error below 1e-9 over (0,1)).
double inverse_normal_cdf(double p);

/// xoshiro256++ generator. All stochastic output of the library flows through
/// this generator so that runs are reproducible from a single 64-bit seed:
///   - state seeded by four SplitMix64 steps,
///   - uniform doubles via ((next() >> 11) + 0.5) * 2^-53, strictly inside (0,1),
///   - normal deviates via the inverse CDF applied to that uniform.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed);

    std::uint64_t next();

    /// Uniform on the open interval (0, 1).
    double uniform01();

    /// Uniform on (a, b).
    double uniform(double a, double b);

    /// Standard normal by inverse-CDF transform.
    double normal();

    bool bernoulli(double p);

private:
    std::uint64_t s_[4];
};

}  // namespace cvxsim
