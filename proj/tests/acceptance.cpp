// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "cdfreg/cli.hpp"
#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace cdfreg;
using nlohmann::json;

namespace {

// Pinned tolerances and sizes.
constexpr double kRidgeTol = 1e-6;
constexpr double kRidgeSeconds = 30.0;
constexpr double kSlopeLo = -0.6, kSlopeHi = -0.4;
constexpr double kFlatSlope = 0.1;
constexpr double kScalingSeconds = 300.0;
constexpr double kCoverageDelta = 0.1;
constexpr double kProjectionTol = 1e-10;
constexpr double kHilbertTol = 1e-10;
constexpr double kGramTol = 1e-8;
constexpr double kKsTol = 1e-12;
constexpr double kMismatchZeroTol = 1e-8;
constexpr double kMismatchLambda = 1.0;

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

WeightVector random_simplex(Rng& rng, int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = -std::log(rng.uniform_open());
    return v / v.sum();
}

Matrix random_orthogonal(Rng& rng, int d) {
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) g(i, k) = rng.normal();
    return Eigen::HouseholderQR<Matrix>(g).householderQ();
}

Outcome closed_form_ridge() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto in = oracle::random_ridge_instance(rng, k);
        const Vector fast = ridge_estimate(oracle::gram_of(in), in.lambda);
        const Vector slow = oracle::ridge_minimizer_lsq(in);
        worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    return {worst <= kRidgeTol && secs < kRidgeSeconds,
            "max |ridge - direct minimizer| = " + fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

struct ScalingOutcome {
    Outcome l2, flat;
};

ScalingOutcome scaling() {
    ScalingConfig c;
    c.d_grid = {5};
    c.lambdas = {0.001};
    c.n_grid = {1000, 10000, 100000};
    c.reps = 50;
    c.metrics = {"l2", "self_normalized"};
    c.threads = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_scaling_experiment(c);
    const double secs = seconds_since(t0);
    double l2 = std::nan(""), sn = std::nan("");
    for (const auto& s : r.slopes) {
        if (s.metric == "l2") l2 = s.slope;
        if (s.metric == "self_normalized") sn = s.slope;
    }
    return {{l2 >= kSlopeLo && l2 <= kSlopeHi && secs < kScalingSeconds,
             "slope " + fmt("%.3f", l2) + ", " + fmt("%.1f", secs) + " s single-threaded"},
            {std::abs(sn) <= kFlatSlope, "slope " + fmt("%.3f", sn)}};
}

Outcome ridge_coverage() {
    CoverageConfig c;
    c.d = 5;
    c.n_grid = {10000};
    c.delta = kCoverageDelta;
    c.reps = 200;
    c.lambda = 0.001;
    c.threads = worker_count();
    const auto r = run_coverage_experiment(c);
    const auto& row = r.rows.at(0);
    return {row.coverage >= 1.0 - kCoverageDelta && row.failures == 0,
            "coverage " + fmt("%.3f", row.coverage) + " over " + std::to_string(row.reps) + " reps"};
}

Outcome penalized_coverage() {
    CoverageConfig c;
    c.mode = CoverageMode::Penalized;
    c.design = Design::PolynomialRandom;
    c.d = 3;
    c.context_atoms = {0.5, 2.0};
    c.n_grid = {50, 500};
    c.lambda = 0.0;
    c.delta = kCoverageDelta;
    c.reps = 200;
    c.threads = worker_count();
    const auto r = run_coverage_experiment(c);
    bool ok = true;
    std::string detail;
    for (const auto& row : r.rows) {
        ok = ok && row.coverage >= 1.0 - 2.0 * kCoverageDelta && row.dominance_violations == 0 && row.failures == 0;
        detail += "n=" + std::to_string(row.n) + ": coverage " + fmt("%.3f", row.coverage) + ", dominance violations " +
                  std::to_string(row.dominance_violations) + "; ";
    }
    detail += "burn-in " + fmt("%.3g", r.rows.at(0).burn_in);
    return {ok, detail};
}

Outcome ks_chain() {
    Rng rng(606);
    int violations = 0;
    for (int k = 0; k < 1000; ++k) {
        const int d = 1 + static_cast<int>(rng.below(8));
        const auto basis = BasisFamily::bernoulli(d);
        const Context p = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform01(); });
        const WeightVector a = random_simplex(rng, d), b = random_simplex(rng, d);
        const double ks = ks_distance(MixtureCdf{a, &basis, p}, MixtureCdf{b, &basis, p}, ks_grid(0.0, 1.0, {0.0, 1.0}));
        if (ks > std::sqrt(static_cast<double>(d)) * (a - b).norm() + kKsTol) ++violations;
    }
    return {violations == 0, std::to_string(violations) + " violations in 1000 pairs"};
}

Outcome projection_contraction() {
    Rng rng(707);
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
        const int d = 1 + static_cast<int>(rng.below(6));
        Matrix B(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) B(i, j) = rng.normal();
        Matrix A = B * B.transpose();
        A.diagonal().array() += 0.05;
        A = 0.5 * (A + A.transpose());
        const Vector v = Vector::NullaryExpr(d, [&](Eigen::Index) { return 2.0 * rng.normal(); });
        const WeightVector theta = random_simplex(rng, d);
        const double gap = weighted_norm(project_simplex_weighted(v, A) - theta, A) - weighted_norm(v - theta, A);
        worst = std::max(worst, gap);
        if (gap > kProjectionTol) ++violations;
    }
    return {violations == 0, std::to_string(violations) + " violations, max excess " + fmt("%.2e", worst)};
}

Outcome hilbert_reduction() {
    Rng rng(808);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const int d = 1 + static_cast<int>(rng.below(6));
        const double lambda = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
        const Vector diag = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform(0.0, 50.0); });
        const Vector u = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
        const Vector sig = Vector::Constant(d, 1.0 / std::sqrt(lambda));
        Matrix U;
        std::optional<Matrix> rotation;
        if (k < 100) {
            U = diag.asDiagonal();
            rotation = Matrix::Identity(d, d);
        } else {
            const Matrix Q = random_orthogonal(rng, d);
            U = Q * diag.asDiagonal() * Q.transpose();
            U = 0.5 * (U + U.transpose());
            rotation = eigen_rotation(U);
        }
        const Vector ridge = ridge_estimate(U, u, lambda);
        const Vector h = hilbert_estimate(U, u, SigmaSequence{sig, rotation});
        worst = std::max(worst, (h - ridge).cwiseAbs().maxCoeff() / std::max(1.0, ridge.cwiseAbs().maxCoeff()));
    }
    return {worst <= kHilbertTol, "max deviation " + fmt("%.2e", worst) + " over 100 diagonal and 100 rotated"};
}

Outcome gram_fast_path() {
    Rng rng(909);
    const auto m = make_uniform_measure(0.0, 1.0, 64);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int d = 1 + static_cast<int>(rng.below(8));
        const Context p = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform01(); });
        const auto b = BasisFamily::bernoulli(d);
        const Vector q = Vector::Ones(d) - p;
        const Matrix quad = gram_matrix_of_context(b, p, m, GramMethod::Quadrature);
        worst = std::max(worst, (Matrix(q * q.transpose()) - quad).cwiseAbs().maxCoeff());
        worst = std::max(worst, (gram_matrix_of_context(b, p, m) - quad).cwiseAbs().maxCoeff());
    }
    return {worst <= kGramTol, "max entry difference " + fmt("%.2e", worst)};
}

Outcome mismatch() {
    CoverageConfig c;
    c.mode = CoverageMode::Mismatch;
    c.design = Design::PolynomialRandom;
    c.d = 3;
    c.n_grid = {10000};
    c.lambda = kMismatchLambda;
    c.delta = kCoverageDelta;
    c.q = 0.1;
    c.reps = 200;
    c.threads = worker_count();
    const auto r = run_coverage_experiment(c);
    const auto& row = r.rows.at(0);
    c.q = 0.0;
    c.reps = 20;
    const auto z = run_coverage_experiment(c);
    const double zero_norm = z.rows.at(0).max_mismatch_norm;
    return {row.coverage >= 1.0 - kCoverageDelta && row.failures == 0 && zero_norm <= kMismatchZeroTol * 10000.0,
            "q=0.1 coverage " + fmt("%.3f", row.coverage) + ", max ||E_n|| " + fmt("%.3g", row.max_mismatch_norm) +
                "; q=0 max ||E_n|| " + fmt("%.2e", zero_norm)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome cli_determinism() {
    const fs::path dir = fs::temp_directory_path() / "cdfreg_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::vector<std::pair<std::string, json>> runs{
        {"synth-bernoulli", {{"d", 3}, {"n_grid", {200, 400}}, {"reps", 6}}},
        {"synth-poly", {{"d", 3}, {"n_grid", {200, 400}}, {"reps", 6}, {"mc_per_step", 200}}},
        {"bound-check", {{"delta", 0.1}, {"d", 3}, {"n_grid", {500}}, {"reps", 12}}},
        {"real", {{"csv", std::string(CDFREG_TEST_DATA) + "/mixture_500.csv"}, {"outcome", "y"}, {"seeds", 6}}}};
    std::string detail;
    bool ok = true;
    for (const auto& [sub, cfg] : runs) {
        const fs::path cfg_path = dir / (sub + ".json");
        std::ofstream(cfg_path) << cfg.dump();
        std::string outputs[2];
        bool ran = true;
        for (int k = 0; k < 2; ++k) {
            const fs::path out = dir / (sub + (k == 0 ? "_t1" : "_t8"));
            const std::string cmd = std::string(CDFREG_CLI) + " " + sub + " --config " + cfg_path.string() + " --out " +
                                    out.string() + " --seed 17 --threads " + (k == 0 ? "1" : "8") + " 2>/dev/null";
            const int status = std::system(cmd.c_str());
            ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
            outputs[k] = slurp(out / "records.csv");
        }
        const bool same = ran && !outputs[0].empty() && outputs[0] == outputs[1];
        ok = ok && same;
        detail += sub + (same ? " identical; " : " DIFFERS; ");
    }
    fs::remove_all(dir);
    return {ok, detail};
}

Outcome pipeline_smoke() {
    PipelineConfig cfg;
    cfg.csv = std::string(CDFREG_TEST_DATA) + "/mixture_500.csv";
    cfg.csv_options.outcome = "y";
    cfg.seeds = 20;
    cfg.threads = worker_count();
    const auto r = evaluate_pipeline(cfg);
    std::map<double, std::pair<double, int>> ridge;
    double ecdf = 0.0;
    int ecdf_n = 0, failures = 0;
    for (const auto& row : r.rows) {
        if (row.method == "mle") continue;
        if (row.status != "ok") {
            ++failures;
            continue;
        }
        if (row.method == "ecdf") ecdf += row.l2_error, ++ecdf_n;
        else ridge[row.lambda].first += row.l2_error, ++ridge[row.lambda].second;
    }
    ecdf /= std::max(ecdf_n, 1);
    bool ok = failures == 0 && ecdf_n == 20 && !ridge.empty();
    std::string detail = "ecdf mean " + fmt("%.4f", ecdf);
    for (const auto& [lambda, acc] : ridge) {
        const double mean = acc.first / acc.second;
        ok = ok && acc.second == 20 && mean < ecdf;
        detail += ", ridge(" + fmt("%g", lambda) + ") mean " + fmt("%.4f", mean);
    }
    return {ok, detail};
}

}  // namespace

int main() {
    int failed = 0;
    const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
    };
    report(1, "ridge closed form vs direct minimization", closed_form_ridge);
    std::optional<ScalingOutcome> s;
    report(2, "l2 error scaling in n", [&] {
        s = scaling();
        return s->l2;
    });
    report(3, "self-normalized error flatness", [&] { return s ? s->flat : Outcome{false, "scaling run failed"}; });
    report(4, "ridge bound coverage", ridge_coverage);
    report(5, "penalized estimator bound and dominance", penalized_coverage);
    report(6, "KS chain inequality", ks_chain);
    report(7, "weighted projection contraction", projection_contraction);
    report(8, "Hilbert estimator reduces to ridge", hilbert_reduction);
    report(9, "Bernoulli Gram fast path", gram_fast_path);
    report(10, "mismatch bound coverage", mismatch);
    report(11, "CLI determinism across thread counts", cli_determinism);
    report(12, "real-data pipeline smoke", pipeline_smoke);
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
