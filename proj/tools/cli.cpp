#include "cli.hpp"

#include "csv.hpp"
#include "cvxsim/driver.hpp"
#include "cvxsim/inference.hpp"
#include "cvxsim/parallel.hpp"
#include "cvxsim/simbench.hpp"
#include "cvxsim/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace cvxsim::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small utilities

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_string(const std::string& path) {
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << fnv1a64_file(path);
    return os.str();
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw Error(path + ": cannot open file for writing");
    }
    out << j.dump(2) << '\n';
}

/// Every command leaves a manifest next to its primary output: the command
/// line, the effective configuration, the seed, the artifact version, the
/// wall time, and a digest per output file.
void write_manifest(const std::string& out_path, const std::string& command,
                    const json& config, std::uint64_t seed, double wall_sec,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["seed"] = seed;
    manifest["artifact_version"] = kVersion;
    manifest["wall_time_sec"] = wall_sec;
    json digests = json::object();
    for (const auto& p : outputs) {
        digests[p] = digest_string(p);
    }
    manifest["outputs"] = digests;
    write_json_file(out_path + ".manifest.json", manifest);
}

json to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v[i]);
    }
    return arr;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(row);
    }
    return rows;
}

Vector vector_from_json(const json& arr) {
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    return v;
}

int resolve_threads(int cli_threads) {
    if (const char* env = std::getenv("CVXSIM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (cli_threads > 0) return cli_threads;
    return hardware_threads();
}

struct EstimatorArgs {
    std::string estimator;
    double lipschitz = 0.0;
    double lambda = 0.0;
    int starts = 5;
    int max_iter = 100;
    double outer_tol = 1e-8;
    double bin_tol = 1e-6;
    std::uint64_t seed = 0;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--estimator", estimator, "Estimator: llse, plse or cvxlse")
            ->required();
        cmd->add_option("--L", lipschitz, "Lipschitz slope bound (llse)");
        cmd->add_option("--lambda", lambda, "Smoothing level (plse); default 0.1 n^{-2/5}");
        cmd->add_option("--starts", starts, "Number of starting directions");
        cmd->add_option("--max-iter", max_iter, "Cap on alternating iterations");
        cmd->add_option("--tol", outer_tol, "Relative criterion decrease for convergence");
        cmd->add_option("--bin-tol", bin_tol, "Projection binning tolerance");
        cmd->add_option("--seed", seed, "Seed for random starts / replications");
    }

    /// Returns the configuration, or prints a usage message and returns
    /// nothing when the estimator/tuning combination is invalid.
    std::optional<EstimatorConfig> to_config() const {
        EstimatorConfig cfg;
        if (estimator == "llse") {
            cfg.kind = EstimatorKind::Llse;
            if (!(lipschitz > 0.0)) {
                std::cerr << "error: --estimator llse requires a positive --L\n";
                return std::nullopt;
            }
            cfg.lipschitz_bound = lipschitz;
        } else if (estimator == "plse") {
            cfg.kind = EstimatorKind::Plse;
            if (lambda != 0.0) {
                if (!(lambda > 0.0)) {
                    std::cerr << "error: --lambda must be positive\n";
                    return std::nullopt;
                }
                cfg.lambda = lambda;
            }
        } else if (estimator == "cvxlse") {
            cfg.kind = EstimatorKind::CvxLse;
        } else {
            std::cerr << "error: unknown estimator '" << estimator << "'\n";
            return std::nullopt;
        }
        if (starts < 1 || max_iter < 1 || !(outer_tol > 0.0) || !(bin_tol > 0.0)) {
            std::cerr << "error: invalid tuning options\n";
            return std::nullopt;
        }
        cfg.n_starts = starts;
        cfg.max_outer_iter = max_iter;
        cfg.outer_tol = outer_tol;
        cfg.bin_tol = bin_tol;
        cfg.seed = seed;
        return cfg;
    }

    json echo() const {
        json j;
        j["estimator"] = estimator;
        if (estimator == "llse") j["L"] = lipschitz;
        if (estimator == "plse" && lambda != 0.0) j["lambda"] = lambda;
        j["starts"] = starts;
        j["max_iter"] = max_iter;
        j["tol"] = outer_tol;
        j["bin_tol"] = bin_tol;
        j["seed"] = seed;
        return j;
    }
};

std::optional<ModelKind> parse_model_kind(const std::string& name) {
    if (name == "quad3") return ModelKind::Quad3;
    if (name == "quadd") return ModelKind::QuadD;
    if (name == "quad4robust") return ModelKind::Quad4Robust;
    if (name == "quad5simple") return ModelKind::Quad5Simple;
    if (name == "absdep") return ModelKind::AbsDep;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// fit

json model_to_json(const FitResult& result, const EstimatorArgs& args, double lambda_used,
                   const Dataset& data) {
    json model;
    model["artifact_version"] = kVersion;
    model["estimator"] = args.estimator;
    model["converged"] = result.converged;
    model["n_outer"] = result.n_outer;
    model["start_index"] = result.start_index;
    model["criterion"] = result.criterion_trace.back();
    model["theta_hat"] = to_json(result.theta_hat.theta);

    if (const auto* affine = std::get_if<PiecewiseAffineLink>(&result.link)) {
        model["knots"] = to_json(affine->t);
        model["values"] = to_json(affine->m_vals);
        if (affine->lipschitz_bound) {
            model["L"] = *affine->lipschitz_bound;
        }
    } else {
        const auto& spline = std::get<ConvexSplineLink>(result.link);
        model["knots"] = to_json(spline.knots());
        model["values"] = to_json(spline.values());
        model["alpha"] = to_json(spline.alpha());
        model["lambda"] = lambda_used;
        model["lambda_inner"] = spline.lambda();
    }

    const Vector fitted = predict(result, data.x);
    model["in_sample_rmse"] =
        std::sqrt((data.y - fitted).squaredNorm() / static_cast<double>(data.n()));
    return model;
}

int cmd_fit(const std::string& command_line, const std::string& data_path,
            const std::string& out_path, const EstimatorArgs& args, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg_opt = args.to_config();
    if (!cfg_opt) return kUsage;
    const EstimatorConfig& cfg = *cfg_opt;

    CsvTable table;
    try {
        table = read_csv(data_path);
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }
    if (table.values.cols() < 2 || table.values.rows() < 3) {
        std::cerr << "error: " << data_path
                  << ": need at least 3 rows and 2 columns (covariates + response)\n";
        return kBadInput;
    }

    const Eigen::Index d = table.values.cols() - 1;
    std::optional<Dataset> data;
    try {
        data.emplace(table.values.leftCols(d), table.values.col(d));
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }

    const double lambda_used =
        (cfg.kind == EstimatorKind::Plse)
            ? cfg.lambda.value_or(default_lambda(static_cast<int>(data->n())))
            : 0.0;

    std::optional<FitResult> result;
    try {
        result = fit(*data, cfg, threads);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        json partial;
        partial["artifact_version"] = kVersion;
        partial["estimator"] = args.estimator;
        partial["converged"] = false;
        partial["error"] = e.what();
        write_json_file(out_path, partial);
        const double wall = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0).count();
        write_manifest(out_path, command_line, args.echo(), args.seed, wall, {out_path});
        return kNumerical;
    }

    json model = model_to_json(*result, args, lambda_used, *data);
    try {
        const CovarianceEstimate cov = plugin_covariance(*result, *data);
        model["sigma_sq_hat"] = cov.sigma_sq_hat;
        model["covariance"] = to_json(cov.sigma);
        const auto cis = confidence_intervals(cov, result->theta_hat,
                                              static_cast<int>(data->n()), 0.95);
        json ci = json::array();
        for (const auto& [lo, hi] : cis) {
            ci.push_back(json::array({lo, hi}));
        }
        model["ci_95"] = ci;
    } catch (const Error& e) {
        model["sigma_sq_hat"] = nullptr;
        model["covariance"] = nullptr;
        model["ci_95"] = nullptr;
        model["inference_error"] = e.what();
    }

    write_json_file(out_path, model);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out_path, command_line, args.echo(), args.seed, wall, {out_path});
    return result->converged ? kOk : kNumerical;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const std::string& command_line, const std::string& model_path,
                const std::string& data_path, const std::string& out_path) {
    const auto t0 = std::chrono::steady_clock::now();
    json model;
    {
        std::ifstream in(model_path);
        if (!in) {
            std::cerr << "error: cannot open " << model_path << '\n';
            return kBadInput;
        }
        try {
            in >> model;
        } catch (const json::exception& e) {
            std::cerr << "error: " << model_path << ": " << e.what() << '\n';
            return kBadInput;
        }
    }

    CsvTable table;
    try {
        table = read_csv(data_path);
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }

    try {
        const Vector theta = vector_from_json(model.at("theta_hat"));
        const Vector knots = vector_from_json(model.at("knots"));
        const Vector values = vector_from_json(model.at("values"));
        if (table.values.cols() != theta.size()) {
            std::cerr << "error: model has " << theta.size() << " covariates, data has "
                      << table.values.cols() << " columns\n";
            return kBadInput;
        }

        Link link = [&]() -> Link {
            const std::string estimator = model.at("estimator").get<std::string>();
            if (estimator == "plse") {
                return ConvexSplineLink(knots, values,
                                        vector_from_json(model.at("alpha")),
                                        model.at("lambda_inner").get<double>());
            }
            std::optional<double> bound;
            if (model.contains("L")) {
                bound = model.at("L").get<double>();
            }
            return PiecewiseAffineLink(knots, values, bound);
        }();

        const Vector proj = table.values * theta;
        Matrix yhat(proj.size(), 1);
        for (Eigen::Index i = 0; i < proj.size(); ++i) {
            yhat(i, 0) = link_value(link, proj[i]);
        }
        write_csv(out_path, {"y_hat"}, yhat);
    } catch (const json::exception& e) {
        std::cerr << "error: " << model_path << ": " << e.what() << '\n';
        return kBadInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json config;
    config["model"] = model_path;
    config["data"] = data_path;
    write_manifest(out_path, command_line, config, 0, wall, {out_path});
    return kOk;
}

// ---------------------------------------------------------------------------
// coverage / simulate

int cmd_coverage(const std::string& command_line, const std::string& model_name, int n,
                 int dim, int reps, double level, const std::string& out_path,
                 const EstimatorArgs& args, int threads) {
    const auto kind = parse_model_kind(model_name);
    if (!kind) {
        std::cerr << "error: unknown model spec '" << model_name << "'\n";
        return kUsage;
    }
    if (reps < 1) {
        std::cerr << "error: --reps must be positive\n";
        return kUsage;
    }
    if (!(level > 0.0 && level < 1.0)) {
        std::cerr << "error: --level must lie in (0, 1)\n";
        return kUsage;
    }
    const auto cfg_opt = args.to_config();
    if (!cfg_opt) return kUsage;

    ModelSpec spec;
    try {
        spec = ModelSpec::make(*kind, n, args.seed, dim);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    const ExperimentReport report = coverage_experiment(spec, *cfg_opt, reps, level, threads);

    json j;
    j["artifact_version"] = kVersion;
    j["model_spec"] = {{"name", model_name}, {"n", spec.n}, {"dim", spec.dim},
                       {"noise_sd", spec.noise_sd}, {"seed", spec.seed}};
    j["estimator"] = args.echo();
    j["reps"] = report.reps;
    j["level"] = report.level;
    j["failures"] = report.failures;
    j["coverage"] = to_json(report.coverage);
    j["avg_length"] = to_json(report.avg_length);
    j["mean_theta_error"] = report.mean_theta_error;
    j["sd_theta_error"] = report.sd_theta_error;
    j["wall_time_sec"] = report.wall_time_sec;
    json rows = json::array();
    for (const auto& rec : report.rows) {
        json row;
        row["rep"] = rec.rep;
        row["ok"] = rec.ok;
        if (rec.ok) {
            row["theta_hat"] = to_json(rec.theta_hat);
            row["ci_lo"] = to_json(rec.ci_lo);
            row["ci_hi"] = to_json(rec.ci_hi);
            row["theta_err"] = rec.theta_err;
        } else {
            row["error"] = rec.error;
        }
        rows.push_back(row);
    }
    j["replications"] = rows;
    write_json_file(out_path, j);
    write_manifest(out_path, command_line, args.echo(), args.seed, report.wall_time_sec,
                   {out_path});

    std::cout << "coverage:";
    for (Eigen::Index i = 0; i < report.coverage.size(); ++i) {
        std::cout << ' ' << report.coverage[i];
    }
    std::cout << "\navg_length:";
    for (Eigen::Index i = 0; i < report.avg_length.size(); ++i) {
        std::cout << ' ' << report.avg_length[i];
    }
    std::cout << "\nfailures: " << report.failures << '\n';

    if (report.failures * 20 > reps) {  // more than 5%
        std::cerr << "error: " << report.failures << " of " << reps
                  << " replications failed\n";
        return kNumerical;
    }
    return kOk;
}

int cmd_simulate(const std::string& command_line, const std::string& model_name,
                 const std::vector<int>& ns, int dim, int reps,
                 const std::string& export_path, const std::string& out_path,
                 const EstimatorArgs& args, int threads) {
    const auto kind = parse_model_kind(model_name);
    if (!kind) {
        std::cerr << "error: unknown model spec '" << model_name << "'\n";
        return kUsage;
    }
    if (reps < 1 || ns.empty()) {
        std::cerr << "error: need --reps >= 1 and at least one --n\n";
        return kUsage;
    }
    const auto cfg_opt = args.to_config();
    if (!cfg_opt) return kUsage;

    ModelSpec spec;
    try {
        spec = ModelSpec::make(*kind, ns.front(), args.seed, dim);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }

    const QqTable table = qq_experiment(spec, *cfg_opt, reps, ns, threads);

    Matrix rows(static_cast<Eigen::Index>(table.rows.size()), 3);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        rows(static_cast<Eigen::Index>(i), 0) = table.rows[i].n;
        rows(static_cast<Eigen::Index>(i), 1) = table.rows[i].rep;
        rows(static_cast<Eigen::Index>(i), 2) = table.rows[i].sqrt_n_err;
    }
    write_csv(export_path, {"n", "rep", "sqrt_n_err"}, rows);

    json j;
    j["artifact_version"] = kVersion;
    j["model_spec"] = {{"name", model_name}, {"dim", spec.dim}, {"noise_sd", spec.noise_sd},
                       {"seed", spec.seed}};
    j["estimator"] = args.echo();
    j["reps"] = reps;
    j["failures"] = table.failures;
    j["wall_time_sec"] = table.wall_time_sec;
    json stats = json::array();
    for (std::size_t i = 0; i < table.variance_by_n.size(); ++i) {
        stats.push_back({{"n", table.variance_by_n[i].first},
                         {"mean", table.mean_by_n[i].second},
                         {"variance", table.variance_by_n[i].second}});
    }
    j["sqrt_n_err_stats"] = stats;
    std::vector<std::string> outputs{export_path};
    if (!out_path.empty()) {
        write_json_file(out_path, j);
        outputs.push_back(out_path);
    }
    write_manifest(export_path, command_line, args.echo(), args.seed, table.wall_time_sec,
                   outputs);

    std::cout << j["sqrt_n_err_stats"].dump() << '\n';

    const int total = static_cast<int>(table.rows.size());
    if (table.failures * 20 > total) {
        std::cerr << "error: " << table.failures << " of " << total
                  << " replications failed\n";
        return kNumerical;
    }
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Convex single-index regression: fit, predict, and simulation studies"};
    app.require_subcommand(1);

    std::string command_line;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i > 0) command_line += ' ';
        command_line += args[i];
    }

    int threads = 0;

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV file");
    std::string fit_data, fit_out;
    EstimatorArgs fit_args;
    fit_cmd->add_option("--data", fit_data, "CSV with covariates then response")->required();
    fit_cmd->add_option("--out", fit_out, "Output model JSON path")->required();
    fit_args.add_options(fit_cmd);
    fit_cmd->add_option("--threads", threads, "Worker threads (env CVXSIM_THREADS overrides)");

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "Evaluate a fitted model on new data");
    std::string pred_model, pred_data, pred_out;
    pred_cmd->add_option("--model", pred_model, "Model JSON from fit")->required();
    pred_cmd->add_option("--data", pred_data, "CSV of covariate rows")->required();
    pred_cmd->add_option("--out", pred_out, "Output CSV with a y_hat column")->required();

    // coverage
    auto* cov_cmd = app.add_subcommand("coverage", "Confidence interval coverage study");
    std::string cov_model = "quad3", cov_out;
    int cov_n = 500, cov_dim = 0, cov_reps = 0;
    double cov_level = 0.95;
    EstimatorArgs cov_args;
    cov_cmd->add_option("--model-spec", cov_model, "Design name (quad3, quadd, ...)");
    cov_cmd->add_option("--n", cov_n, "Sample size per replication");
    cov_cmd->add_option("--dim", cov_dim, "Dimension (quadd only)");
    cov_cmd->add_option("--reps", cov_reps, "Number of replications")->required();
    cov_cmd->add_option("--level", cov_level, "Nominal coverage level");
    cov_cmd->add_option("--out", cov_out, "Output report JSON path")->required();
    cov_args.add_options(cov_cmd);
    cov_cmd->add_option("--threads", threads, "Worker threads (env CVXSIM_THREADS overrides)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Standardized-error table across sample sizes");
    std::string sim_model = "quad3", sim_export, sim_out;
    std::vector<int> sim_ns;
    int sim_dim = 0, sim_reps = 0;
    EstimatorArgs sim_args;
    sim_cmd->add_option("--model-spec", sim_model, "Design name (quad3, quadd, ...)");
    sim_cmd->add_option("--ns", sim_ns, "Sample sizes")->delimiter(',');
    sim_cmd->add_option("--dim", sim_dim, "Dimension (quadd only)");
    sim_cmd->add_option("--reps", sim_reps, "Replications per sample size")->required();
    sim_cmd->add_option("--export", sim_export, "Output CSV (n, rep, sqrt_n_err)")->required();
    sim_cmd->add_option("--out", sim_out, "Optional summary JSON path");
    sim_args.add_options(sim_cmd);
    sim_cmd->add_option("--threads", threads, "Worker threads (env CVXSIM_THREADS overrides)");

    std::vector<std::string> cli_args(args.begin() + 1, args.end());
    std::reverse(cli_args.begin(), cli_args.end());
    try {
        app.parse(cli_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    const int worker_threads = resolve_threads(threads);
    try {
        if (fit_cmd->parsed()) {
            return cmd_fit(command_line, fit_data, fit_out, fit_args, worker_threads);
        }
        if (pred_cmd->parsed()) {
            return cmd_predict(command_line, pred_model, pred_data, pred_out);
        }
        if (cov_cmd->parsed()) {
            return cmd_coverage(command_line, cov_model, cov_n, cov_dim, cov_reps,
                                cov_level, cov_out, cov_args, worker_threads);
        }
        if (sim_cmd->parsed()) {
            return cmd_simulate(command_line, sim_model, sim_ns, sim_dim, sim_reps,
                                sim_export, sim_out, sim_args, worker_threads);
        }
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc));
    for (int i = 0; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run_cli(args);
}

}  // namespace cvxsim::cli
