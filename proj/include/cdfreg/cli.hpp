#pragma once

// Command-line driver: JSON configs in, CSV/JSON artifacts out.
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include "cdfreg/io.hpp"
#include "cdfreg/realdata.hpp"
#include "cdfreg/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

namespace cdfreg::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3 };

struct RunOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool long_mode = false;
};

using json = nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed) {
    require(j.is_object(), "config must be a JSON object", "config");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw DomainError("unknown config key '" + key + "'", key);
    if (j.contains("schema_version"))
        require(j["schema_version"].is_number_integer() && j["schema_version"].get<int>() == kSchemaVersion,
                "unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")", "schema_version");
}

// Typed read with the key as the error field.
template <class T>
T get(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DomainError("config key '" + key + "' has the wrong type", key);
    }
}

template <class T>
T get_required(const json& j, const std::string& key) {
    if (!j.contains(key)) throw DomainError("config key '" + key + "' is required", key);
    return get<T>(j, key, T{});
}

inline std::pair<double, double> get_range(const json& j, const std::string& key, std::pair<double, double> fallback) {
    const auto v = get<std::vector<double>>(j, key, {fallback.first, fallback.second});
    require(v.size() == 2 && v[0] < v[1], key + " must be [lo, hi] with lo < hi", key);
    return {v[0], v[1]};
}

inline std::optional<WeightVector> get_theta(const json& j) {
    if (!j.contains("theta_star")) return std::nullopt;
    const auto v = get<std::vector<double>>(j, "theta_star", {});
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline CSchedule get_schedule(const json& j) {
    const auto s = get<std::string>(j, "schedule", "aligned");
    if (s == "aligned") return CSchedule::Aligned;
    if (s == "literal") return CSchedule::Literal;
    throw DomainError("schedule must be 'aligned' or 'literal'", "schedule");
}

inline const std::set<std::string>& shared_keys() {
    static const std::set<std::string> k{"schema_version", "experiment_id", "seed", "threads", "theta_star"};
    return k;
}

inline std::set<std::string> with_shared(std::set<std::string> k) {
    k.insert(shared_keys().begin(), shared_keys().end());
    return k;
}

inline void apply_scaling_scale(ScalingConfig& c, const json& j, bool long_mode) {
    const std::vector<long> n_default = long_mode ? std::vector<long>{1000, 10000, 100000, 1000000}
                                                  : std::vector<long>{1000, 10000, 100000};
    c.n_grid = get<std::vector<long>>(j, "n_grid", n_default);
    c.reps = get<int>(j, "reps", long_mode ? 100 : 50);
}

inline void read_d_and_lambdas(ScalingConfig& c, const json& j) {
    require(!(j.contains("d") && j.contains("d_grid")), "give either d or d_grid", "d_grid");
    require(!(j.contains("lambda") && j.contains("lambdas")), "give either lambda or lambdas", "lambdas");
    if (j.contains("d")) c.d_grid = {get<int>(j, "d", 5)};
    else c.d_grid = get<std::vector<int>>(j, "d_grid", {5});
    if (j.contains("lambda")) c.lambdas = {get<double>(j, "lambda", 1e-3)};
    else c.lambdas = get<std::vector<double>>(j, "lambdas", {1e-3});
}

inline void validate_scaling(const ScalingConfig& c) {
    require(!c.d_grid.empty(), "d_grid must be non-empty", "d_grid");
    for (int d : c.d_grid) require(d >= 1, "every d must be >= 1", "d_grid");
    require(!c.n_grid.empty(), "n_grid must be non-empty", "n_grid");
    for (long n : c.n_grid) require(n >= 1, "every n must be >= 1", "n_grid");
    require(!c.lambdas.empty(), "lambdas must be non-empty", "lambdas");
    for (double l : c.lambdas) require(l > 0.0 && std::isfinite(l), "every lambda must be > 0", "lambdas");
    require(c.reps >= 1, "reps must be >= 1", "reps");
    require(c.delta > 0.0 && c.delta < 1.0, "delta must lie in (0, 1)", "delta");
    require(c.threads >= 1, "threads must be >= 1", "threads");
    for (const auto& m : c.metrics)
        require(std::find(scaling_metric_names().begin(), scaling_metric_names().end(), m) != scaling_metric_names().end(),
                "unknown metric '" + m + "'", "metrics");
    if (c.theta_star) {
        require_simplex(*c.theta_star, "theta_star");
        for (int d : c.d_grid) require(c.theta_star->size() == d, "theta_star dimension must equal d", "theta_star");
    }
}

inline json to_json(const ScalingConfig& c) {
    json j{{"experiment_id", c.experiment_id},
           {"design", to_string(c.design)},
           {"d_grid", c.d_grid},
           {"n_grid", c.n_grid},
           {"lambdas", c.lambdas},
           {"reps", c.reps},
           {"seed", c.seed},
           {"metrics", c.metrics},
           {"delta", c.delta},
           {"threads", c.threads}};
    if (c.theta_star) j["theta_star"] = detail::vec_to_std(*c.theta_star);
    if (c.design == Design::HardInstanceBernoulli) {
        j["schedule"] = to_string(c.schedule);
        j["c"] = c.c;
        j["ks_family_points"] = c.ks_family_points;
    } else {
        j["x_range"] = {c.x_lo, c.x_hi};
        j["support"] = {c.s_lo, c.s_hi};
        j["n_nodes"] = c.n_nodes;
        j["ks_contexts"] = c.ks_contexts;
        j["mc_per_step"] = c.mc_per_step;
    }
    return j;
}

inline ScalingConfig synth_bernoulli_config(const json& j, bool long_mode) {
    check_keys(j, with_shared({"d", "d_grid", "n_grid", "lambda", "lambdas", "reps", "metrics", "delta", "schedule", "c",
                               "ks_family_points"}));
    ScalingConfig c;
    c.experiment_id = get<std::string>(j, "experiment_id", "synth-bernoulli");
    c.design = Design::HardInstanceBernoulli;
    read_d_and_lambdas(c, j);
    apply_scaling_scale(c, j, long_mode);
    c.seed = get<std::uint64_t>(j, "seed", 0);
    c.metrics = get<std::vector<std::string>>(j, "metrics", {"l2", "self_normalized", "eps_lambda", "mu_min_U",
                                                             "log_d_minus_log_mu", "covered"});
    c.delta = get<double>(j, "delta", 0.1);
    c.schedule = get_schedule(j);
    c.c = get<double>(j, "c", 1.0);
    c.ks_family_points = get<int>(j, "ks_family_points", 256);
    require(c.ks_family_points >= 2, "ks_family_points must be >= 2", "ks_family_points");
    c.theta_star = get_theta(j);
    c.threads = get<int>(j, "threads", 1);
    validate_scaling(c);
    return c;
}

inline ScalingConfig synth_poly_config(const json& j, bool long_mode) {
    check_keys(j, with_shared({"d", "d_grid", "n_grid", "lambda", "lambdas", "reps", "metrics", "delta", "x_range",
                               "support", "n_nodes", "ks_contexts", "mc_per_step"}));
    ScalingConfig c;
    c.experiment_id = get<std::string>(j, "experiment_id", "synth-poly");
    c.design = Design::PolynomialRandom;
    read_d_and_lambdas(c, j);
    apply_scaling_scale(c, j, long_mode);
    c.seed = get<std::uint64_t>(j, "seed", 0);
    c.metrics = get<std::vector<std::string>>(j, "metrics", {"l2", "self_normalized", "sigma_n", "eps_lambda", "mu_min_U",
                                                             "log_d_minus_log_mu", "covered"});
    c.delta = get<double>(j, "delta", 0.1);
    std::tie(c.x_lo, c.x_hi) = get_range(j, "x_range", {0.5, 2.0});
    std::tie(c.s_lo, c.s_hi) = get_range(j, "support", {0.0, 2.0});
    require(c.x_lo > 0.0, "x_range must be positive", "x_range");
    c.n_nodes = get<int>(j, "n_nodes", kDefaultIntervalNodes);
    require(c.n_nodes >= 1, "n_nodes must be >= 1", "n_nodes");
    c.ks_contexts = get<int>(j, "ks_contexts", 16);
    require(c.ks_contexts >= 1, "ks_contexts must be >= 1", "ks_contexts");
    c.mc_per_step = get<long>(j, "mc_per_step", 1000);
    require(c.mc_per_step >= 1, "mc_per_step must be >= 1", "mc_per_step");
    c.theta_star = get_theta(j);
    c.threads = get<int>(j, "threads", 1);
    validate_scaling(c);
    return c;
}

inline CoverageMode coverage_mode_from(const std::string& s) {
    for (auto m : {CoverageMode::Ridge, CoverageMode::RidgeRandom, CoverageMode::Penalized, CoverageMode::Mismatch})
        if (to_string(m) == s) return m;
    throw DomainError("mode must be ridge, ridge_random, penalized or mismatch", "mode");
}

inline Design design_from(const std::string& s) {
    if (s == to_string(Design::HardInstanceBernoulli)) return Design::HardInstanceBernoulli;
    if (s == to_string(Design::PolynomialRandom)) return Design::PolynomialRandom;
    throw DomainError("design must be 'bernoulli_hard' or 'polynomial'", "design");
}

inline json to_json(const CoverageConfig& c) {
    json j{{"experiment_id", c.experiment_id},
           {"mode", to_string(c.mode)},
           {"design", to_string(c.design)},
           {"d", c.d},
           {"n_grid", c.n_grid},
           {"lambda", c.lambda},
           {"delta", c.delta},
           {"reps", c.reps},
           {"seed", c.seed},
           {"threads", c.threads}};
    if (c.theta_star) j["theta_star"] = detail::vec_to_std(*c.theta_star);
    if (c.design == Design::HardInstanceBernoulli) {
        j["schedule"] = to_string(c.schedule);
        j["c"] = c.c;
    } else {
        j["context_atoms"] = c.context_atoms;
        j["x_range"] = {c.x_lo, c.x_hi};
        j["support"] = {c.s_lo, c.s_hi};
        j["n_nodes"] = c.n_nodes;
        j["mc_per_step"] = c.mc_per_step;
        if (c.mode == CoverageMode::Mismatch) j["q"] = c.q;
    }
    return j;
}

inline CoverageConfig bound_check_config(const json& j, bool long_mode) {
    check_keys(j, with_shared({"mode", "design", "d", "n_grid", "lambda", "delta", "reps", "schedule", "c", "context_atoms",
                               "x_range", "support", "n_nodes", "mc_per_step", "q"}));
    CoverageConfig c;
    c.experiment_id = get<std::string>(j, "experiment_id", "bound-check");
    c.mode = coverage_mode_from(get<std::string>(j, "mode", "ridge"));
    const bool poly_mode = c.mode == CoverageMode::Mismatch || c.mode == CoverageMode::Penalized ||
                           c.mode == CoverageMode::RidgeRandom;
    c.design = design_from(get<std::string>(j, "design", poly_mode ? "polynomial" : "bernoulli_hard"));
    c.d = get<int>(j, "d", c.design == Design::HardInstanceBernoulli ? 5 : 3);
    require(c.d >= 1, "d must be >= 1", "d");
    c.n_grid = get<std::vector<long>>(j, "n_grid", {10000});
    c.lambda = get<double>(j, "lambda", c.mode == CoverageMode::Penalized ? 0.0 : 1e-3);
    c.delta = get_required<double>(j, "delta");
    require(c.delta > 0.0 && c.delta < 1.0, "delta must lie in (0, 1)", "delta");
    c.reps = get<int>(j, "reps", long_mode ? 1000 : 200);
    require(c.reps >= 1, "reps must be >= 1", "reps");
    c.seed = get<std::uint64_t>(j, "seed", 0);
    c.schedule = get_schedule(j);
    c.c = get<double>(j, "c", 1.0);
    c.context_atoms = get<std::vector<double>>(j, "context_atoms", {});
    std::tie(c.x_lo, c.x_hi) = get_range(j, "x_range", {0.5, 2.0});
    std::tie(c.s_lo, c.s_hi) = get_range(j, "support", {0.0, 2.0});
    c.n_nodes = get<int>(j, "n_nodes", kDefaultIntervalNodes);
    require(c.n_nodes >= 1, "n_nodes must be >= 1", "n_nodes");
    c.mc_per_step = get<long>(j, "mc_per_step", 1000);
    require(c.mc_per_step >= 1, "mc_per_step must be >= 1", "mc_per_step");
    c.q = get<double>(j, "q", 0.1);
    require(c.q >= 0.0 && c.q <= 1.0, "q must lie in [0, 1]", "q");
    c.theta_star = get_theta(j);
    c.threads = get<int>(j, "threads", 1);
    require(c.threads >= 1, "threads must be >= 1", "threads");
    return c;
}

inline BasisKind pipeline_basis_from(const std::string& s) {
    if (s == "gaussian_laplace") return BasisKind::GaussianLaplaceMix;
    if (s == "logistic_probit") return BasisKind::LogisticProbitMix;
    throw DomainError("basis must be 'gaussian_laplace' or 'logistic_probit'", "basis");
}

// Relative CSV paths resolve against the config file's directory.
inline PipelineConfig real_config(const json& j, const std::string& config_path) {
    check_keys(j, {"schema_version", "seed", "threads", "csv", "outcome", "delimiter", "features", "ordinal_encode", "basis",
                   "w", "lambdas", "measure", "seeds", "methods", "project", "standardize_outcome"});
    PipelineConfig c;
    std::filesystem::path csv = get_required<std::string>(j, "csv");
    if (csv.is_relative() && !config_path.empty())
        csv = std::filesystem::path(config_path).parent_path() / csv;
    c.csv = csv.string();
    c.csv_options.outcome = get_required<std::string>(j, "outcome");
    const auto delim = get<std::string>(j, "delimiter", ",");
    require(delim.size() == 1, "delimiter must be a single character", "delimiter");
    c.csv_options.delimiter = delim[0];
    c.csv_options.features = get<std::vector<std::string>>(j, "features", {});
    c.csv_options.ordinal_encode = get<bool>(j, "ordinal_encode", false);
    c.basis = pipeline_basis_from(get<std::string>(j, "basis", "gaussian_laplace"));
    c.w = get<double>(j, "w", c.basis == BasisKind::GaussianLaplaceMix ? 0.0 : 0.5);
    c.lambdas = get<std::vector<double>>(j, "lambdas", {0.1, 1.0, 5.0});
    if (j.contains("measure")) c.measure = measure_from_json(j["measure"]);
    c.seeds = get<int>(j, "seeds", 20);
    c.seed = get<std::uint64_t>(j, "seed", 0);
    c.methods = get<std::vector<std::string>>(j, "methods", {"ridge", "ecdf", "mle"});
    c.project = get<bool>(j, "project", true);
    c.standardize_outcome = get<bool>(j, "standardize_outcome", true);
    c.threads = get<int>(j, "threads", 1);
    require(c.threads >= 1, "threads must be >= 1", "threads");
    require(c.seeds >= 1, "seeds must be >= 1", "seeds");
    require(c.w >= 0.0 && c.w <= 1.0, "w must lie in [0, 1]", "w");
    return c;
}

inline json to_json(const PipelineConfig& c) {
    json j{{"csv", std::filesystem::path(c.csv).filename().string()},
           {"outcome", c.csv_options.outcome},
           {"delimiter", std::string(1, c.csv_options.delimiter)},
           {"features", c.csv_options.features},
           {"ordinal_encode", c.csv_options.ordinal_encode},
           {"basis", c.basis == BasisKind::GaussianLaplaceMix ? "gaussian_laplace" : "logistic_probit"},
           {"w", c.w},
           {"lambdas", c.lambdas},
           {"seeds", c.seeds},
           {"seed", c.seed},
           {"methods", c.methods},
           {"project", c.project},
           {"standardize_outcome", c.standardize_outcome},
           {"threads", c.threads}};
    j["measure"] = c.measure ? to_json(*c.measure) : json("auto");
    return j;
}

struct Artifacts {
    std::string records, aggregates, summary;
};

inline json summary_header(const json& config) {
    return {{"version", version_string()}, {"config", provenance_config(config)}};
}

inline Artifacts run_scaling(const ScalingConfig& c) {
    const auto result = run_scaling_experiment(c);
    const json cfg = to_json(c);
    std::ostringstream rec, agg;
    write_records_csv(rec, result.records, cfg);
    write_aggregates_csv(agg, result.aggregates, cfg);
    json summary = summary_header(cfg);
    summary["slopes"] = slopes_json(result.slopes);
    int failed = 0;
    for (const auto& r : result.records) failed += r.failed;
    summary["failed_records"] = failed;
    return {rec.str(), agg.str(), summary.dump(2) + "\n"};
}

inline Artifacts run_bound_check(const CoverageConfig& c) {
    const auto report = run_coverage_experiment(c);
    const json cfg = to_json(c);
    std::ostringstream rec, agg;
    write_records_csv(rec, report.records, cfg);
    write_aggregates_csv(agg, aggregate(report.records), cfg);
    json summary = summary_header(cfg);
    summary.update(coverage_json(report));
    return {rec.str(), agg.str(), summary.dump(2) + "\n"};
}

inline Artifacts run_real(const PipelineConfig& c) {
    const auto report = evaluate_pipeline(c);
    const json cfg = to_json(c);
    std::ostringstream rec, agg;
    write_pipeline_csv(rec, report, cfg);
    const json s = pipeline_summary(report);
    write_provenance(agg, cfg);
    agg << "method,count,failures,mean,min,q25,median,q75,max\n";
    for (const auto& m : s["methods"]) {
        agg << m["method"].get<std::string>() << "," << m["count"].get<int>() << "," << m["failures"].get<int>();
        for (const char* k : {"mean", "min", "q25", "median", "q75", "max"})
            agg << "," << (m.contains(k) ? format_double(m[k].get<double>()) : std::string("nan"));
        agg << "\n";
    }
    json summary = summary_header(cfg);
    summary.update(s);
    return {rec.str(), agg.str(), summary.dump(2) + "\n"};
}

inline json error_json(const std::string& kind, const std::string& message, const std::string& field) {
    json j{{"error", kind}, {"message", message}};
    if (!field.empty()) j["field"] = field;
    return j;
}

inline json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config file '" + path + "'", "config");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("config is not valid JSON: ") + e.what(), "config");
    }
}

// Runs one subcommand and writes records.csv, aggregates.csv and summary.json.
inline int run_command(const std::string& command, const RunOptions& opt, std::ostream& err) {
    try {
        json j = read_config(opt.config_path);
        require(j.is_object(), "config must be a JSON object", "config");
        if (opt.seed) j["seed"] = *opt.seed;
        if (opt.threads) j["threads"] = *opt.threads;
        Artifacts a;
        if (command == "synth-bernoulli") a = run_scaling(synth_bernoulli_config(j, opt.long_mode));
        else if (command == "synth-poly") a = run_scaling(synth_poly_config(j, opt.long_mode));
        else if (command == "bound-check") a = run_bound_check(bound_check_config(j, opt.long_mode));
        else if (command == "real") a = run_real(real_config(j, opt.config_path));
        else throw DomainError("unknown subcommand '" + command + "'", "subcommand");

        std::filesystem::create_directories(opt.out_dir);
        const std::filesystem::path out(opt.out_dir);
        write_file((out / "records.csv").string(), a.records);
        write_file((out / "aggregates.csv").string(), a.aggregates);
        write_file((out / "summary.json").string(), a.summary);
        return kOk;
    } catch (const NumericalError& e) {
        err << error_json("numerical", e.what(), e.field()).dump() << "\n";
        return kNumericalError;
    } catch (const Error& e) {
        err << error_json("config", e.what(), e.field()).dump() << "\n";
        return kConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << error_json("config", e.what(), "out").dump() << "\n";
        return kConfigError;
    }
}

inline int main(int argc, char** argv, std::ostream& err = std::cerr) {
    CLI::App app{"Functional linear regression of contextual CDFs"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);
    RunOptions opt;
    std::uint64_t seed = 0;
    int threads = 1;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth-bernoulli", "Bernoulli hard-instance scaling sweep"},
        {"synth-poly", "polynomial-CDF scaling sweep with random contexts"},
        {"bound-check", "empirical coverage of the confidence bounds"},
        {"real", "tabular pipeline against ECDF and MLE baselines"}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--long", opt.long_mode, "full-size grids and repetition counts");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        err << error_json("usage", e.what(), "").dump() << "\n";
        return kConfigError;
    }
    for (auto* sub : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--threads")) opt.threads = threads;
        return run_command(sub->get_name(), opt, err);
    }
    return kConfigError;
}

}  // namespace cdfreg::cli
