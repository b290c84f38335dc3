#include "cvxsim/simbench.hpp"

#include "cvxsim/inference.hpp"
#include "cvxsim/parallel.hpp"
#include "cvxsim/rng.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace cvxsim {

namespace {

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector model_theta0(const ModelSpec& spec) {
    Vector theta0(spec.dim);
    switch (spec.kind) {
        case ModelKind::Quad3:
        case ModelKind::Quad4Robust:
        case ModelKind::Quad5Simple:
            theta0.setOnes();
            theta0 /= std::sqrt(static_cast<double>(spec.dim));
            break;
        case ModelKind::QuadD:
            theta0.setZero();
            theta0[0] = 2.0 / std::sqrt(5.0);
            theta0[1] = 1.0 / std::sqrt(5.0);
            break;
        case ModelKind::AbsDep:
            theta0 << 1.3, -1.3, 1.0, -0.5, -0.5, -0.5;
            theta0 /= std::sqrt(5.13);
            break;
    }
    return theta0;
}

}  // namespace

ModelSpec ModelSpec::make(ModelKind kind, int n, std::uint64_t seed, int dim) {
    ModelSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.seed = seed;
    switch (kind) {
        case ModelKind::Quad3:
            spec.dim = 3;
            spec.noise_sd = 0.3;
            break;
        case ModelKind::QuadD:
            spec.dim = (dim > 0) ? dim : 10;
            spec.noise_sd = 0.2;
            if (spec.dim < 2) {
                throw InvalidInputError("ModelSpec: QuadD needs dim >= 2");
            }
            return spec;
        case ModelKind::Quad4Robust:
            spec.dim = 4;
            spec.noise_sd = 0.1;
            break;
        case ModelKind::Quad5Simple:
            spec.dim = 5;
            spec.noise_sd = 1.0;
            break;
        case ModelKind::AbsDep:
            spec.dim = 6;
            spec.noise_sd = 0.1;
            break;
    }
    if (dim > 0 && dim != spec.dim) {
        throw InvalidInputError("ModelSpec: this design has a fixed dimension");
    }
    return spec;
}

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Quad3: return "quad3";
        case ModelKind::QuadD: return "quadd";
        case ModelKind::Quad4Robust: return "quad4robust";
        case ModelKind::Quad5Simple: return "quad5simple";
        case ModelKind::AbsDep: return "absdep";
    }
    return "?";
}

GeneratedData generate(const ModelSpec& spec) {
    if (spec.n < 3) {
        throw InvalidInputError("generate: need n >= 3");
    }
    Xoshiro256pp rng(spec.seed);
    const int n = spec.n;
    const int d = spec.dim;
    Matrix x(n, d);
    Vector y(n);
    const Vector theta0 = model_theta0(spec);

    switch (spec.kind) {
        case ModelKind::Quad3:
        case ModelKind::Quad4Robust:
        case ModelKind::Quad5Simple: {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d; ++j) {
                    x(i, j) = rng.uniform(-1.0, 1.0);
                }
                const double u = x.row(i).dot(theta0);
                y[i] = u * u + spec.noise_sd * rng.normal();
            }
            break;
        }
        case ModelKind::QuadD: {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d; ++j) {
                    x(i, j) = rng.uniform(-1.0, 5.0);
                }
                const double u = x.row(i).dot(theta0);
                y[i] = u * u + spec.noise_sd * rng.normal();
            }
            break;
        }
        case ModelKind::AbsDep: {
            for (int i = 0; i < n; ++i) {
                const double x1 = rng.uniform(-1.0, 1.0);
                const double x2 = rng.uniform(-1.0, 1.0);
                const double z1 = rng.uniform(-1.0, 1.0);
                const double z2 = rng.uniform(-1.0, 1.0);
                x(i, 0) = x1;
                x(i, 1) = x2;
                x(i, 2) = 0.2 * x1 + 0.2 * (x2 + 2.0) * (x2 + 2.0) + 0.2 * z1;
                x(i, 3) = 0.1 + 0.1 * (x1 + x2) + 0.3 * (x1 + 1.5) * (x1 + 1.5) + 0.2 * z2;
                x(i, 4) = rng.bernoulli(std::exp(x1) / (1.0 + std::exp(x1))) ? 1.0 : 0.0;
                x(i, 5) = rng.bernoulli(std::exp(x2) / (1.0 + std::exp(x2))) ? 1.0 : 0.0;
                const double u = x.row(i).dot(theta0);
                y[i] = std::abs(u) + spec.noise_sd * rng.normal();
            }
            break;
        }
    }
    return GeneratedData{Dataset(std::move(x), std::move(y)), IndexParameter(theta0)};
}

double theta_error(const Vector& theta_hat, const Vector& theta0) {
    if (theta_hat.size() != theta0.size()) {
        throw InvalidInputError("theta_error: dimension mismatch");
    }
    return (theta_hat - theta0).cwiseAbs().mean();
}

ExperimentReport coverage_experiment(const ModelSpec& spec, const EstimatorConfig& cfg,
                                     int reps, double level, int threads) {
    if (reps < 1) {
        throw InvalidInputError("coverage_experiment: reps must be positive");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidInputError("coverage_experiment: level must lie in (0, 1)");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const int d = spec.dim;

    ExperimentReport report;
    report.reps = reps;
    report.level = level;
    report.rows.resize(static_cast<std::size_t>(reps));

    parallel_for(reps, threads, [&](int r) {
        const auto rep_t0 = std::chrono::steady_clock::now();
        ReplicationRecord rec;
        rec.rep = r;
        const std::uint64_t rep_master = child_seed(spec.seed, static_cast<std::uint64_t>(r));
        try {
            ModelSpec rep_spec = spec;
            rep_spec.seed = child_seed(rep_master, 0);
            const GeneratedData gen = generate(rep_spec);

            EstimatorConfig rep_cfg = cfg;
            rep_cfg.seed = child_seed(rep_master, 1);
            const FitResult fit_result = fit(gen.data, rep_cfg);
            const CovarianceEstimate cov = plugin_covariance(fit_result, gen.data);
            const auto cis =
                confidence_intervals(cov, fit_result.theta_hat, spec.n, level);

            rec.theta_hat = fit_result.theta_hat.theta;
            rec.ci_lo.resize(static_cast<Eigen::Index>(cis.size()));
            rec.ci_hi.resize(static_cast<Eigen::Index>(cis.size()));
            for (std::size_t i = 0; i < cis.size(); ++i) {
                rec.ci_lo[static_cast<Eigen::Index>(i)] = cis[i].first;
                rec.ci_hi[static_cast<Eigen::Index>(i)] = cis[i].second;
            }
            rec.theta_err = theta_error(fit_result.theta_hat.theta, gen.theta0.theta);
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        rec.seconds = elapsed_since(rep_t0);
        report.rows[static_cast<std::size_t>(r)] = std::move(rec);
    });

    const Vector theta0 = model_theta0(spec);
    report.coverage = Vector::Zero(d);
    report.avg_length = Vector::Zero(d);
    int ok_count = 0;
    double err_sum = 0.0;
    double err_sq_sum = 0.0;
    for (const auto& rec : report.rows) {
        if (!rec.ok) {
            ++report.failures;
            continue;
        }
        ++ok_count;
        for (int i = 0; i < d; ++i) {
            if (rec.ci_lo[i] <= theta0[i] && theta0[i] <= rec.ci_hi[i]) {
                report.coverage[i] += 1.0;
            }
            report.avg_length[i] += rec.ci_hi[i] - rec.ci_lo[i];
        }
        err_sum += rec.theta_err;
        err_sq_sum += rec.theta_err * rec.theta_err;
    }
    if (ok_count > 0) {
        report.coverage /= static_cast<double>(ok_count);
        report.avg_length /= static_cast<double>(ok_count);
        report.mean_theta_error = err_sum / static_cast<double>(ok_count);
        const double var = err_sq_sum / static_cast<double>(ok_count) -
                           report.mean_theta_error * report.mean_theta_error;
        report.sd_theta_error = std::sqrt(std::max(var, 0.0));
    }
    report.wall_time_sec = elapsed_since(t0);
    return report;
}

QqTable qq_experiment(const ModelSpec& spec, const EstimatorConfig& cfg, int reps,
                      const std::vector<int>& ns, int threads) {
    if (reps < 1 || ns.empty()) {
        throw InvalidInputError("qq_experiment: need reps >= 1 and at least one n");
    }
    const auto t0 = std::chrono::steady_clock::now();
    QqTable table;
    table.rows.resize(static_cast<std::size_t>(reps) * ns.size());

    parallel_for(static_cast<int>(table.rows.size()), threads, [&](int task) {
        const int n_idx = task / reps;
        const int r = task % reps;
        const int n = ns[static_cast<std::size_t>(n_idx)];
        QqRow row{n, r, std::numeric_limits<double>::quiet_NaN()};
        const std::uint64_t rep_master =
            child_seed(spec.seed, static_cast<std::uint64_t>(task));
        try {
            ModelSpec rep_spec = spec;
            rep_spec.n = n;
            rep_spec.seed = child_seed(rep_master, 0);
            const GeneratedData gen = generate(rep_spec);

            EstimatorConfig rep_cfg = cfg;
            rep_cfg.seed = child_seed(rep_master, 1);
            const FitResult fit_result = fit(gen.data, rep_cfg);
            row.sqrt_n_err = std::sqrt(static_cast<double>(n)) *
                             (fit_result.theta_hat[0] - gen.theta0[0]);
        } catch (const std::exception&) {
            // failure recorded as NaN
        }
        table.rows[static_cast<std::size_t>(task)] = row;
    });

    for (std::size_t n_idx = 0; n_idx < ns.size(); ++n_idx) {
        double sum = 0.0;
        double sq = 0.0;
        int count = 0;
        for (int r = 0; r < reps; ++r) {
            const QqRow& row = table.rows[n_idx * static_cast<std::size_t>(reps) +
                                          static_cast<std::size_t>(r)];
            if (std::isnan(row.sqrt_n_err)) {
                ++table.failures;
                continue;
            }
            sum += row.sqrt_n_err;
            sq += row.sqrt_n_err * row.sqrt_n_err;
            ++count;
        }
        const double mean = (count > 0) ? sum / count : 0.0;
        const double var = (count > 1) ? (sq - count * mean * mean) / (count - 1) : 0.0;
        table.mean_by_n.emplace_back(ns[n_idx], mean);
        table.variance_by_n.emplace_back(ns[n_idx], var);
    }
    table.wall_time_sec = elapsed_since(t0);
    return table;
}

}  // namespace cvxsim
