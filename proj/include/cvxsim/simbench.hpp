#pragma once

#include "cvxsim/driver.hpp"
#include "cvxsim/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cvxsim {

/// Synthetic designs used by the simulation harness (quadratic links with
/// uniform covariates in 3 to d dimensions, plus a piecewise-linear link with
/// dependent covariates).
enum class ModelKind { Quad3, QuadD, Quad4Robust, Quad5Simple, AbsDep };

struct ModelSpec {
    ModelKind kind = ModelKind::Quad3;
    int n = 0;
    int dim = 0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;

    /// Fills the canonical dimension and noise level for the named design.
    /// `dim` is honored only for QuadD (and must be >= 2 there); the other
    /// designs have fixed dimensions and reject overrides.
    static ModelSpec make(ModelKind kind, int n, std::uint64_t seed, int dim = 0);
};

const char* model_kind_name(ModelKind kind);

struct GeneratedData {
    Dataset data;
    IndexParameter theta0;
};

/// Draws a sample of the given design. For each observation the covariate
/// coordinates (and any latent uniforms they need) are drawn in index order,
/// followed by the noise deviate, so streams are reproducible coordinate by
/// coordinate from the seed.
GeneratedData generate(const ModelSpec& spec);

/// Mean absolute coordinate error between two index vectors.
double theta_error(const Vector& theta_hat, const Vector& theta0);

struct ReplicationRecord {
    int rep = 0;
    bool ok = false;
    Vector theta_hat;
    Vector ci_lo;
    Vector ci_hi;
    double theta_err = 0.0;
    double seconds = 0.0;
    std::string error;
};

struct ExperimentReport {
    int reps = 0;
    double level = 0.0;
    int failures = 0;
    std::vector<ReplicationRecord> rows;  // ordered by replication index
    Vector coverage;                      // per coordinate, over successful reps
    Vector avg_length;                    // per coordinate
    double mean_theta_error = 0.0;
    double sd_theta_error = 0.0;
    double wall_time_sec = 0.0;
};

/// Per replication: generate, fit, plug-in covariance, confidence intervals;
/// tallies per-coordinate coverage of theta0 and interval lengths.
/// Replication r derives its data seed and fit seed from the master seed by
/// hashing, so any subset of replications can be reproduced independently.
/// Failures are recorded, not fatal. Replications run on up to `threads`
/// workers; the report does not depend on the thread count.
ExperimentReport coverage_experiment(const ModelSpec& spec, const EstimatorConfig& cfg,
                                     int reps, double level, int threads = 1);

struct QqRow {
    int n = 0;
    int rep = 0;
    double sqrt_n_err = 0.0;  // sqrt(n) (theta_hat_1 - theta0_1); NaN on failure
};

struct QqTable {
    std::vector<QqRow> rows;  // reps rows for every requested n
    std::vector<std::pair<int, double>> variance_by_n;
    std::vector<std::pair<int, double>> mean_by_n;
    int failures = 0;
    double wall_time_sec = 0.0;
};

/// Standardized first-coordinate errors across sample sizes, for external
/// quantile plots; also reports their sample mean and variance per n.
QqTable qq_experiment(const ModelSpec& spec, const EstimatorConfig& cfg, int reps,
                      const std::vector<int>& ns, int threads = 1);

}  // namespace cvxsim
