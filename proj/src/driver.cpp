#include "cvxsim/driver.hpp"

#include "cvxsim/core.hpp"
#include "cvxsim/parallel.hpp"
#include "cvxsim/rng.hpp"
#include "cvxsim/stiefel.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

namespace cvxsim {

void EstimatorConfig::validate() const {
    if (kind == EstimatorKind::Llse && !(lipschitz_bound > 0.0)) {
        throw InvalidInputError("EstimatorConfig: Llse requires a positive Lipschitz bound");
    }
    if (lambda && !(*lambda > 0.0)) {
        throw InvalidInputError("EstimatorConfig: lambda must be positive when given");
    }
    if (max_outer_iter < 1) {
        throw InvalidInputError("EstimatorConfig: max_outer_iter must be at least 1");
    }
    if (!(outer_tol > 0.0)) {
        throw InvalidInputError("EstimatorConfig: outer_tol must be positive");
    }
    if (n_starts < 1) {
        throw InvalidInputError("EstimatorConfig: n_starts must be at least 1");
    }
    if (!(bin_tol > 0.0)) {
        throw InvalidInputError("EstimatorConfig: bin_tol must be positive");
    }
    if (line_search_grid < 3) {
        throw InvalidInputError("EstimatorConfig: line_search_grid must be at least 3");
    }
}

double link_value(const Link& link, double s) {
    return std::visit([s](const auto& l) { return l.value(s); }, link);
}

double link_derivative(const Link& link, double s) {
    return std::visit([s](const auto& l) { return l.derivative(s); }, link);
}

double default_lambda(int n) {
    if (n < 1) {
        throw InvalidInputError("default_lambda: n must be positive");
    }
    return 0.1 * std::pow(static_cast<double>(n), -0.4);
}

double criterion_value(const Dataset& data, const Link& link, const IndexParameter& theta,
                       double lambda) {
    const Vector proj = data.x * theta.theta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double r = data.y[i] - link_value(link, proj[i]);
        acc += r * r;
    }
    double c = acc / static_cast<double>(data.n());
    if (const auto* spline = std::get_if<ConvexSplineLink>(&link)) {
        c += lambda * lambda * spline->roughness();
    }
    return c;
}

namespace {

Link fit_link(const SortedProjection& proj, const EstimatorConfig& cfg,
              double lambda_inner, const IndexParameter& theta) {
    switch (cfg.kind) {
        case EstimatorKind::Llse:
            return fit_lipschitz(proj, cfg.lipschitz_bound);
        case EstimatorKind::CvxLse:
            return fit_convex(proj);
        case EstimatorKind::Plse:
            if (proj.size() < 3) {
                throw RestartRequiredError(
                    "fit_alternating: fewer than three bins for the penalized fit",
                    theta.theta);
            }
            return fit_penalized(proj, lambda_inner);
    }
    throw InvalidInputError("fit_link: unknown estimator kind");
}

}  // namespace

FitResult fit_alternating(const Dataset& data, const IndexParameter& theta0,
                          const EstimatorConfig& cfg) {
    cfg.validate();
    if (theta0.dim() != data.d()) {
        throw InvalidInputError("fit_alternating: dimension mismatch");
    }

    const int n = static_cast<int>(data.n());
    const double lambda_cfg =
        (cfg.kind == EstimatorKind::Plse) ? cfg.lambda.value_or(default_lambda(n)) : 0.0;
    // The penalized link fit works with the unnormalized weighted sum of
    // squares; scaling lambda by sqrt(n) makes it minimize the mean squared
    // loss plus lambda_cfg^2 J^2.
    const double lambda_inner = std::sqrt(static_cast<double>(n)) * lambda_cfg;

    IndexParameter theta = theta0;
    for (int boundary_restarts = 0;; ++boundary_restarts) {
        FitResult result{theta, Link{PiecewiseAffineLink(Vector::Zero(1), Vector::Zero(1))},
                         {}, false, 0, 0};
        result.criterion_trace.reserve(static_cast<std::size_t>(cfg.max_outer_iter));
        double prev = std::numeric_limits<double>::infinity();
        bool boundary_hit = false;

        for (int k = 0; k < cfg.max_outer_iter; ++k) {
            SortedProjection proj;
            try {
                proj = project_and_bin(data, theta, cfg.bin_tol);
            } catch (const DegenerateProjectionError& e) {
                throw RestartRequiredError(e.what(), theta.theta);
            }
            const Link link = fit_link(proj, cfg, lambda_inner, theta);
            const double c = criterion_value(data, link, theta, lambda_cfg);

            result.theta_hat = theta;
            result.link = link;
            result.criterion_trace.push_back(c);
            result.n_outer = k + 1;

            if (k > 0 && prev - c <= cfg.outer_tol * (1.0 + std::abs(prev))) {
                result.converged = true;
                break;
            }
            prev = c;

            try {
                theta = std::visit(
                    [&](const auto& l) {
                        return descend_theta(data, l, theta, cfg.line_search_grid);
                    },
                    link);
            } catch (const BoundaryPointError&) {
                // Restart the whole run from a point nudged off the boundary.
                Vector v = theta.theta;
                v[0] = 1e-6;
                theta = normalize_theta(v);
                boundary_hit = true;
                break;
            }
        }

        if (!boundary_hit) {
            return result;
        }
        if (boundary_restarts >= 3) {
            throw RestartRequiredError("fit_alternating: repeated boundary restarts",
                                       theta.theta);
        }
    }
}

namespace {

IndexParameter least_squares_direction(const Dataset& data) {
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    Matrix design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = data.x;
    const Vector beta = design.colPivHouseholderQr().solve(data.y);
    Vector dir = beta.tail(d);
    if (dir.norm() < 1e-12 || !dir.allFinite()) {
        dir = Vector::Zero(d);
        dir[0] = 1.0;
    }
    return normalize_theta(dir);
}

IndexParameter random_direction(Xoshiro256pp& rng, Eigen::Index d) {
    for (;;) {
        Vector v(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            v[j] = rng.normal();
        }
        if (v.norm() > 1e-8) {
            return normalize_theta(v);
        }
    }
}

}  // namespace

FitResult fit(const Dataset& data, const EstimatorConfig& cfg, int threads) {
    cfg.validate();
    const Eigen::Index d = data.d();

    // Starting directions are fixed up front so the result cannot depend on
    // scheduling. Each start also owns a seed for any restart redraws.
    std::vector<IndexParameter> starts;
    starts.reserve(static_cast<std::size_t>(cfg.n_starts));
    starts.push_back(least_squares_direction(data));
    for (int s = 1; s < cfg.n_starts; ++s) {
        Xoshiro256pp rng(child_seed(cfg.seed, static_cast<std::uint64_t>(s)));
        starts.push_back(random_direction(rng, d));
    }

    std::vector<std::optional<FitResult>> results(starts.size());
    std::vector<std::string> errors(starts.size());

    parallel_for(static_cast<int>(starts.size()), threads, [&](int s) {
        Xoshiro256pp restart_rng(
            child_seed(cfg.seed ^ 0x5bf03635ULL, static_cast<std::uint64_t>(s)));
        IndexParameter theta = starts[static_cast<std::size_t>(s)];
        for (int attempt = 0;; ++attempt) {
            try {
                FitResult r = fit_alternating(data, theta, cfg);
                r.start_index = s;
                results[static_cast<std::size_t>(s)] = std::move(r);
                return;
            } catch (const RestartRequiredError& e) {
                if (attempt >= 2) {
                    errors[static_cast<std::size_t>(s)] = e.what();
                    return;
                }
                theta = random_direction(restart_rng, d);
            } catch (const Error& e) {
                errors[static_cast<std::size_t>(s)] = e.what();
                return;
            }
        }
    });

    int best = -1;
    for (std::size_t s = 0; s < results.size(); ++s) {
        if (!results[s]) continue;
        if (best < 0 || results[s]->criterion_trace.back() <
                            results[static_cast<std::size_t>(best)]->criterion_trace.back()) {
            best = static_cast<int>(s);
        }
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "fit: all " << cfg.n_starts << " starts failed";
        for (std::size_t s = 0; s < errors.size(); ++s) {
            msg << "; start " << s << ": " << errors[s];
        }
        throw Error(msg.str());
    }
    return *results[static_cast<std::size_t>(best)];
}

Vector predict(const FitResult& fit, const Matrix& x_new) {
    if (x_new.cols() != fit.theta_hat.dim()) {
        throw InvalidInputError("predict: covariate dimension mismatch");
    }
    const Vector proj = x_new * fit.theta_hat.theta;
    Vector out(proj.size());
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
        out[i] = link_value(fit.link, proj[i]);
    }
    return out;
}

}  // namespace cvxsim
