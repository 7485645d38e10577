#pragma once

// Synthetic data: Scheme I/II samplers, the Bernoulli hard instance, the
// mismatched model, and replicated scaling / coverage drivers.

#include "cdfreg/bounds.hpp"
#include "cdfreg/estimators.hpp"
#include "cdfreg/gram.hpp"
#include "cdfreg/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <exception>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace cdfreg {

enum class Scheme { Adversarial, Random, Fixed };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Adversarial: return "adversarial";
        case Scheme::Random: return "random";
        case Scheme::Fixed: return "fixed";
    }
    return "?";
}

struct Dataset {
    std::vector<Sample> pairs;
    Scheme scheme = Scheme::Random;
    std::uint64_t seed = 0;
    WeightVector theta_star;
    nlohmann::json basis;
    Vector E_n;  // sum_j int e_j Phi_j dm; only filled by sample_mismatched
};

namespace detail {

inline nlohmann::json describe(const BasisFamily& b) {
    if (b.kind() == BasisKind::Custom) return {{"kind", "custom"}, {"name", std::get<CustomBasis>(b.params()).name}};
    return to_json(b);
}

// FNV-1a, used to turn experiment ids into stream ids.
inline std::uint64_t stable_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. fn must write
// its result into slot i so the output does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t count, int threads, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < count; i = next++) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

// ---------------------------------------------------------------- hard instance

// Aligned sets c_j = 1 / mu_min(R_{j-1}) for j > d, so the later success
// probabilities sit in [1 - 1/d^2, 1 - 1/(2 d^2)]. Literal keeps c_j = c.
enum class CSchedule { Literal, Aligned };

inline std::string to_string(CSchedule s) { return s == CSchedule::Literal ? "literal" : "aligned"; }

// Success probabilities p_j of step j (1-based). mu_min_prev = mu_min(R_{j-1})
// is only read for j > d.
inline Vector hard_instance_params(int d, long n, double c, long j, double mu_min_prev = 0.0) {
    require(d >= 2, "hard instance needs d >= 2", "d");
    require(n >= 1 && j >= 1 && j <= n, "hard instance step j must lie in [1, n]", "j");
    const double dd = d;
    Vector p(d);
    if (j <= d) {
        for (int i = 1; i <= d; ++i) p(i - 1) = 1.0 - c / (2 * dd * dd * dd) - c * (i == j) / (2 * dd * dd * dd);
    } else {
        const int k = static_cast<int>(j % d == 0 ? d : j % d);
        const double a = c * mu_min_prev / (2 * dd * dd);
        for (int i = 1; i <= d; ++i) p(i - 1) = 1.0 - a - a * (i == k);
    }
    require((p.array() >= 0.0).all() && (p.array() <= 1.0).all(), "hard instance probability outside [0, 1]", "c");
    return p;
}

class HardInstance {
public:
    HardInstance(int d, long n, CSchedule schedule = CSchedule::Aligned, double c = 1.0)
        : d_(d), n_(n), schedule_(schedule), c_(c), older_(Matrix::Zero(d, d)), last_q_(Vector::Zero(d)) {
        require(d >= 2, "hard instance needs d >= 2", "d");
        require(n >= 1, "hard instance needs n >= 1", "n");
        require(c > 0.0, "hard instance constant c must be > 0", "c");
    }

    // p_{j+1}; advances the step counter.
    Vector next() {
        ++j_;
        Vector p;
        if (j_ <= d_) p = hard_instance_params(d_, n_, c_, j_);
        else if (schedule_ == CSchedule::Aligned) p = hard_instance_params(d_, n_, 1.0, j_, 1.0);
        else p = hard_instance_params(d_, n_, c_, j_, min_eigenvalue(running()));
        if (j_ > 1) older_ += last_q_ * last_q_.transpose();
        last_q_ = Vector::Ones(d_) - p;
        return p;
    }

    // R_j = q_j q_j' + (1/n) sum_{k<j} q_k q_k' for the current step j.
    Matrix running() const { return last_q_ * last_q_.transpose() + older_ / static_cast<double>(n_); }

    long step() const { return j_; }

private:
    int d_;
    long n_;
    CSchedule schedule_;
    double c_;
    long j_ = 0;
    Matrix older_;
    Vector last_q_;
};

inline std::vector<Context> hard_instance_contexts(int d, long n, CSchedule schedule = CSchedule::Aligned,
                                                   double c = 1.0) {
    HardInstance h(d, n, schedule, c);
    std::vector<Context> out;
    out.reserve(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) out.push_back(h.next());
    return out;
}

// ---------------------------------------------------------------- samplers

// Next context given the history so far and the adversary's own stream.
using Adversary = std::function<Context(const std::vector<Sample>& history, Rng& rng)>;

inline Dataset sample_scheme1(const BasisFamily& basis, const Adversary& adversary, const WeightVector& theta_star,
                              long n, std::uint64_t seed) {
    require_simplex(theta_star, "theta_star");
    require(n >= 0, "n must be >= 0", "n");
    Dataset out{{}, Scheme::Adversarial, seed, theta_star, detail::describe(basis), {}};
    out.pairs.reserve(static_cast<std::size_t>(n));
    Rng data(seed);
    Rng adv = data.substream(1);
    for (long j = 0; j < n; ++j) {
        Context x = adversary(out.pairs, adv);
        const double y = inverse_cdf_sample(theta_star, basis, x, data.uniform_open());
        out.pairs.push_back({std::move(x), y});
    }
    return out;
}

// Contexts come from the sampler on the data stream, interleaved with the
// inverse-CDF uniforms.
inline Dataset sample_scheme2(const BasisFamily& basis, const ContextDistribution& contexts,
                              const WeightVector& theta_star, long n, std::uint64_t seed) {
    require_simplex(theta_star, "theta_star");
    require(n >= 0, "n must be >= 0", "n");
    Dataset out{{}, Scheme::Random, seed, theta_star, detail::describe(basis), {}};
    out.pairs.reserve(static_cast<std::size_t>(n));
    Rng data(seed);
    for (long j = 0; j < n; ++j) {
        Context x = draw_context(contexts, data);
        const double y = inverse_cdf_sample(theta_star, basis, x, data.uniform_open());
        out.pairs.push_back({std::move(x), y});
    }
    return out;
}

// int_S e(x, t) Phi(x, t) m(dt) with e = q (phi_e - theta*' Phi).
inline Vector mismatch_vector(const BasisFamily& basis, const BasisFamily& phi_e, double q, const WeightVector& theta_star,
                              const Context& x, const QuadMeasure& m) {
    if (q == 0.0) return Vector::Zero(basis.dim());
    std::vector<double> cuts = basis.breakpoints(x);
    for (double b : phi_e.breakpoints(x)) cuts.push_back(b);
    const QuadRule rule = split_rule(m, std::move(cuts));
    Vector out = Vector::Zero(basis.dim());
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const Vector phi = basis.eval(x, rule.nodes[k]);
        const double e = q * (phi_e.eval(x, rule.nodes[k])(0) - theta_star.dot(phi));
        out += rule.weights[k] * e * phi;
    }
    return out;
}

// Samples from (1 - q) theta*' Phi + q phi_e. The coin uses its own substream,
// so q = 0 reproduces sample_scheme2 draw for draw. phi_e is a one-dimensional
// family. E_n is accumulated against m.
inline Dataset sample_mismatched(const BasisFamily& basis, const BasisFamily& phi_e, double q,
                                 const WeightVector& theta_star, const ContextDistribution& contexts, long n,
                                 std::uint64_t seed, const QuadMeasure& m) {
    require(q >= 0.0 && q <= 1.0, "mismatch weight q must lie in [0, 1]", "q");
    require(phi_e.dim() == 1, "mismatch component must be one-dimensional", "phi_e");
    require_simplex(theta_star, "theta_star");
    Dataset out{{}, Scheme::Random, seed, theta_star, detail::describe(basis), Vector::Zero(basis.dim())};
    out.pairs.reserve(static_cast<std::size_t>(n));
    const WeightVector one = Vector::Ones(1);
    Rng data(seed);
    Rng coin = data.substream(2);
    for (long j = 0; j < n; ++j) {
        Context x = draw_context(contexts, data);
        const double u = data.uniform_open();
        const bool mismatch = coin.uniform01() < q;
        const double y = mismatch ? inverse_cdf_sample(one, phi_e, x, u) : inverse_cdf_sample(theta_star, basis, x, u);
        out.E_n += mismatch_vector(basis, phi_e, q, theta_star, x, m);
        out.pairs.push_back({std::move(x), y});
    }
    return out;
}

// B_n = n E_x[int e Phi dm], Monte Carlo over mc draws of the context.
inline Vector mismatch_expectation(const BasisFamily& basis, const BasisFamily& phi_e, double q,
                                   const WeightVector& theta_star, const ContextDistribution& contexts, long n, long mc,
                                   std::uint64_t seed, const QuadMeasure& m) {
    Vector mean = Vector::Zero(basis.dim());
    if (const auto* atoms = std::get_if<ContextAtoms>(&contexts)) {
        for (std::size_t k = 0; k < atoms->contexts.size(); ++k)
            mean += atoms->probs[k] * mismatch_vector(basis, phi_e, q, theta_star, atoms->contexts[k], m);
    } else {
        require(mc >= 1, "mc must be >= 1", "mc_per_step");
        Rng rng(seed, {0x426eULL});
        for (long k = 0; k < mc; ++k) mean += mismatch_vector(basis, phi_e, q, theta_star, draw_context(contexts, rng), m);
        mean /= static_cast<double>(mc);
    }
    return static_cast<double>(n) * mean;
}

// phi_e(x, t) = (1 - cos(pi x t)) / 2 on [0, 1/x]: a smooth CDF outside the
// polynomial family, used as the default mismatch component.
inline BasisFamily cosine_mismatch_component(double support_hi = 2.0) {
    CustomBasis c;
    c.d = 1;
    c.support_lo = 0.0;
    c.support_hi = support_hi;
    c.name = "cosine";
    c.eval = [](const Context& x, double t) {
        const double z = std::clamp(x(0) * t, 0.0, 1.0);
        return Vector::Constant(1, 0.5 * (1.0 - std::cos(std::numbers::pi * z)));
    };
    return BasisFamily(c);
}

// ---------------------------------------------------------------- experiments

enum class Design { HardInstanceBernoulli, PolynomialRandom };

inline std::string to_string(Design d) { return d == Design::HardInstanceBernoulli ? "bernoulli_hard" : "polynomial"; }

// theta*_i proportional to i + 1.
inline WeightVector default_theta_star(int d) {
    Vector t(d);
    for (int i = 0; i < d; ++i) t(i) = i + 2.0;
    return t / t.sum();
}

struct ExperimentRecord {
    std::string experiment_id;
    std::string scheme;
    int d = 0;
    long n = 0;
    double lambda = 0.0;
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> metrics;
    bool failed = false;
    std::string error;
};

struct AggregateRow {
    std::string experiment_id;
    std::string scheme;
    int d = 0;
    long n = 0;
    double lambda = 0.0;
    std::string metric;
    int count = 0;
    double mean = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

// Type-7 empirical quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double p) {
    require(!v.empty(), "quantile of an empty sample", "values");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// One row per (d, n, lambda, metric) over the finite per-rep values, in
// first-appearance order. When mu_min_U is present, the across-rep variant
// log d - log(mean mu_min) is emitted alongside the per-rep one.
inline std::vector<AggregateRow> aggregate(const std::vector<ExperimentRecord>& records) {
    using Key = std::tuple<int, long, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<double>> groups;
    std::map<Key, const ExperimentRecord*> first;
    for (const auto& r : records)
        for (const auto& [name, value] : r.metrics) {
            Key k{r.d, r.n, r.lambda, name};
            if (!groups.count(k)) {
                order.push_back(k);
                first[k] = &r;
            }
            auto& g = groups[k];
            if (std::isfinite(value)) g.push_back(value);
        }
    std::vector<AggregateRow> out;
    for (const auto& k : order) {
        const auto& v = groups[k];
        const auto* r = first[k];
        AggregateRow row{r->experiment_id, r->scheme, r->d, r->n, r->lambda, std::get<3>(k), static_cast<int>(v.size())};
        if (v.empty()) {
            row.mean = row.q05 = row.q95 = std::numeric_limits<double>::quiet_NaN();
        } else {
            double s = 0.0;
            for (double x : v) s += x;
            row.mean = s / static_cast<double>(v.size());
            row.q05 = quantile(v, 0.05);
            row.q95 = quantile(v, 0.95);
        }
        out.push_back(row);
        if (std::get<3>(k) == "mu_min_U" && !v.empty() && row.mean > 0.0) {
            AggregateRow alt = row;
            alt.metric = "log_d_minus_log_mean_mu";
            alt.mean = alt.q05 = alt.q95 = std::log(static_cast<double>(row.d)) - std::log(row.mean);
            out.push_back(alt);
        }
    }
    return out;
}

struct SlopeRow {
    int d = 0;
    double lambda = 0.0;
    std::string metric;
    double slope = 0.0;
    double intercept = 0.0;
    int points = 0;
};

// Log-log slope of the mean metric against n for every (d, lambda, metric)
// with at least two distinct n.
inline std::vector<SlopeRow> scaling_slopes(const std::vector<AggregateRow>& rows) {
    using Key = std::tuple<int, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<std::pair<double, double>>> pts;
    for (const auto& r : rows) {
        if (!(r.mean > 0.0) || !std::isfinite(r.mean)) continue;
        Key k{r.d, r.lambda, r.metric};
        if (!pts.count(k)) order.push_back(k);
        pts[k].emplace_back(static_cast<double>(r.n), r.mean);
    }
    std::vector<SlopeRow> out;
    for (const auto& k : order) {
        const auto& p = pts[k];
        bool distinct = false;
        for (const auto& q : p) distinct = distinct || q.first != p.front().first;
        if (!distinct) continue;
        const auto [slope, intercept] = fit_loglog_slope(p);
        out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), slope, intercept, static_cast<int>(p.size())});
    }
    return out;
}

inline const std::vector<std::string>& scaling_metric_names() {
    static const std::vector<std::string> names{"l2",     "l2_projected", "self_normalized",   "sigma_n",
                                                "ks",     "eps_lambda",   "mu_min_U",          "log_d_minus_log_mu",
                                                "covered"};
    return names;
}

struct ScalingConfig {
    std::string experiment_id = "scaling";
    Design design = Design::HardInstanceBernoulli;
    std::vector<int> d_grid{5};
    std::vector<long> n_grid{1000};
    std::vector<double> lambdas{1e-3};
    int reps = 1;
    std::uint64_t seed = 0;
    std::vector<std::string> metrics{"l2"};
    double delta = 0.1;  // for eps_lambda and covered
    CSchedule schedule = CSchedule::Aligned;
    double c = 1.0;
    std::optional<WeightVector> theta_star;
    double x_lo = 0.5, x_hi = 2.0;  // polynomial contexts ~ U[x_lo, x_hi]
    double s_lo = 0.0, s_hi = 2.0;  // support S, uniform measure
    int n_nodes = kDefaultIntervalNodes;
    int ks_contexts = 16;           // polynomial KS: contexts spread over [x_lo, x_hi]
    int ks_family_points = 256;     // Bernoulli KS: parameters in [1 - 1/d^2, 1 - 1/(2 d^2)]
    long mc_per_step = 1000;
    int threads = 1;
};

struct ScalingResult {
    std::vector<ExperimentRecord> records;
    std::vector<AggregateRow> aggregates;
    std::vector<SlopeRow> slopes;
};

namespace detail {

struct DesignSetup {
    BasisFamily basis;
    QuadMeasure measure;
    Scheme scheme;
};

inline DesignSetup make_design(Design design, int d, double s_lo, double s_hi, int n_nodes) {
    if (design == Design::HardInstanceBernoulli)
        return {BasisFamily::bernoulli(d), make_uniform_measure(0.0, 1.0, n_nodes), Scheme::Fixed};
    return {BasisFamily::polynomial(d), make_uniform_measure(s_lo, s_hi, n_nodes), Scheme::Random};
}

inline ContextDistribution uniform_contexts(double lo, double hi) {
    require(lo > 0.0 && lo < hi, "context range must satisfy 0 < lo < hi", "x_range");
    return ContextSampler([lo, hi](Rng& rng) { return Context::Constant(1, rng.uniform(lo, hi)); });
}

inline ContextDistribution atom_contexts(const std::vector<double>& xs) {
    ContextAtoms a;
    for (double x : xs) {
        a.contexts.push_back(Context::Constant(1, x));
        a.probs.push_back(1.0 / static_cast<double>(xs.size()));
    }
    return a;
}

// KS between the projected estimate's mixture and theta*'s, maximized over
// the design's evaluation family of contexts.
inline double ks_metric(Design design, const BasisFamily& basis, const WeightVector& est, const WeightVector& theta_star,
                        const ScalingConfig& cfg) {
    const int d = basis.dim();
    std::vector<Context> family;
    if (design == Design::HardInstanceBernoulli) {
        const double hi = 1.0 - 1.0 / (2.0 * d * d), lo = 1.0 - 1.0 / (static_cast<double>(d) * d);
        for (int a = 0; a < cfg.ks_family_points; ++a) {
            const double rho = lo + (hi - lo) * a / std::max(1, cfg.ks_family_points - 1);
            for (int k = 0; k < d; ++k) {
                Context p = Context::Constant(d, hi);
                p(k) = rho;
                family.push_back(p);
            }
        }
    } else {
        for (int a = 0; a < cfg.ks_contexts; ++a)
            family.push_back(Context::Constant(1, cfg.x_lo + (cfg.x_hi - cfg.x_lo) * a / std::max(1, cfg.ks_contexts - 1)));
    }
    double out = 0.0;
    for (const auto& x : family) {
        const auto grid = design == Design::HardInstanceBernoulli ? ks_grid(-0.5, 1.5, {0.0, 1.0})
                                                                  : ks_grid(cfg.s_lo, cfg.s_hi, basis.breakpoints(x));
        out = std::max(out, ks_distance([&](double t) { return mixture_cdf_eval(est, basis, x, t); },
                                        [&](double t) { return mixture_cdf_eval(theta_star, basis, x, t); }, grid));
    }
    return out;
}

}  // namespace detail

inline ScalingResult run_scaling_experiment(const ScalingConfig& cfg) {
    require(cfg.reps >= 1, "reps must be >= 1", "reps");
    require(!cfg.d_grid.empty() && !cfg.n_grid.empty(), "d_grid and n_grid must be non-empty", "n_grid");
    require(!cfg.lambdas.empty(), "lambdas must be non-empty", "lambdas");
    for (double l : cfg.lambdas) require(l > 0.0 && std::isfinite(l), "every lambda must be > 0", "lambdas");
    for (long n : cfg.n_grid) require(n >= 1, "every n must be >= 1", "n_grid");
    for (const auto& m : cfg.metrics)
        require(std::find(scaling_metric_names().begin(), scaling_metric_names().end(), m) != scaling_metric_names().end(),
                "unknown metric '" + m + "'", "metrics");
    const auto wants = [&](const char* m) { return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end(); };

    struct Point {
        int d;
        long n;
    };
    std::vector<Point> grid;
    for (int d : cfg.d_grid)
        for (long n : cfg.n_grid) grid.push_back({d, n});

    // Per-d shared state: theta*, design, population Gram mean, hard-instance contexts.
    struct PerD {
        WeightVector theta;
        detail::DesignSetup setup;
        Matrix sigma_mean;
    };
    std::map<int, PerD> per_d;
    const ContextDistribution contexts = detail::uniform_contexts(cfg.x_lo, cfg.x_hi);
    for (int d : cfg.d_grid) {
        if (per_d.count(d)) continue;
        WeightVector theta = cfg.theta_star ? *cfg.theta_star : default_theta_star(d);
        require(theta.size() == d, "theta_star dimension must equal d", "theta_star");
        require_simplex(theta, "theta_star");
        auto setup = detail::make_design(cfg.design, d, cfg.s_lo, cfg.s_hi, cfg.n_nodes);
        Matrix sigma_mean;
        if (cfg.design == Design::PolynomialRandom && wants("sigma_n"))
            sigma_mean = population_gram_mc(setup.basis, contexts, setup.measure, 1, cfg.mc_per_step,
                                            cfg.seed ^ static_cast<std::uint64_t>(d))
                             .Sigma;
        per_d.emplace(d, PerD{theta, std::move(setup), sigma_mean});
    }
    std::map<std::pair<int, long>, std::vector<Context>> fixed_contexts;
    if (cfg.design == Design::HardInstanceBernoulli)
        for (const auto& p : grid)
            if (!fixed_contexts.count({p.d, p.n}))
                fixed_contexts[{p.d, p.n}] = hard_instance_contexts(p.d, p.n, cfg.schedule, cfg.c);

    const std::uint64_t exp_stream = detail::stable_hash(cfg.experiment_id);
    const std::size_t tasks = grid.size() * static_cast<std::size_t>(cfg.reps);
    std::vector<std::vector<ExperimentRecord>> slots(tasks);

    detail::parallel_for(tasks, cfg.threads, [&](std::size_t t) {
        const std::size_t g = t / static_cast<std::size_t>(cfg.reps);
        const int rep = static_cast<int>(t % static_cast<std::size_t>(cfg.reps));
        const auto [d, n] = grid[g];
        const PerD& pd = per_d.at(d);
        const BasisFamily& basis = pd.setup.basis;
        const std::uint64_t key = Rng(cfg.seed, {exp_stream, g, static_cast<std::uint64_t>(rep)}).key();

        auto blank = [&](double lambda) {
            return ExperimentRecord{cfg.experiment_id, to_string(pd.setup.scheme), d, n, lambda, rep, key, {}, false, {}};
        };
        try {
            Dataset data;
            if (cfg.design == Design::HardInstanceBernoulli) {
                const auto& ctx = fixed_contexts.at({d, n});
                data = sample_scheme1(
                    basis, [&](const std::vector<Sample>& h, Rng&) { return ctx[h.size()]; }, pd.theta, n, key);
                data.scheme = Scheme::Fixed;
            } else {
                data = sample_scheme2(basis, contexts, pd.theta, n, key);
            }
            GramState state = GramState::empty(d);
            for (const auto& s : data.pairs) state.add(basis, s.x, s.y, pd.setup.measure);

            for (double lambda : cfg.lambdas) {
                ExperimentRecord rec = blank(lambda);
                const WeightVector est = ridge_estimate(state, lambda);
                const Vector err = est - pd.theta;
                const Matrix Ul = regularized_gram(state, lambda);
                const double eps = epsilon_lambda(static_cast<double>(n), d, cfg.delta, lambda, pd.theta.norm());
                for (const auto& m : cfg.metrics) {
                    double v = 0.0;
                    if (m == "l2") v = err.norm();
                    else if (m == "l2_projected") v = (project_simplex(est) - pd.theta).norm();
                    else if (m == "self_normalized") v = weighted_norm(err, Ul);
                    else if (m == "sigma_n") {
                        const Matrix sigma = cfg.design == Design::HardInstanceBernoulli
                                                 ? state.U
                                                 : Matrix(static_cast<double>(n) * pd.sigma_mean);
                        v = weighted_norm(err, sigma);
                    } else if (m == "ks") v = detail::ks_metric(cfg.design, basis, project_simplex(est), pd.theta, cfg);
                    else if (m == "eps_lambda") v = eps;
                    else if (m == "mu_min_U") v = min_eigenvalue(Ul);
                    else if (m == "log_d_minus_log_mu") v = std::log(static_cast<double>(d)) - std::log(min_eigenvalue(Ul));
                    else if (m == "covered") v = weighted_norm(err, Ul) <= eps ? 1.0 : 0.0;
                    rec.metrics.emplace_back(m, v);
                }
                slots[t].push_back(std::move(rec));
            }
        } catch (const std::exception& e) {
            for (double lambda : cfg.lambdas) {
                ExperimentRecord rec = blank(lambda);
                rec.failed = true;
                rec.error = e.what();
                for (const auto& m : cfg.metrics) rec.metrics.emplace_back(m, std::numeric_limits<double>::quiet_NaN());
                slots[t].push_back(std::move(rec));
            }
        }
    });

    ScalingResult out;
    for (auto& s : slots)
        for (auto& r : s) out.records.push_back(std::move(r));
    out.aggregates = aggregate(out.records);
    out.slopes = scaling_slopes(out.aggregates);
    return out;
}

// ---------------------------------------------------------------- coverage

enum class CoverageMode {
    Ridge,        // ||theta_hat - theta*||_{U_n(lambda)} <= eps_lambda
    RidgeRandom,  // ||theta_hat - theta*||_{Sigma_n} <= sqrt(2) eps_lambda
    Penalized,    // ||theta_check - theta*|| <= penalized_bound
    Mismatch,     // ||theta_hat - theta*||_{U_n(lambda)} <= eps_lambda + ||E_n|| / sqrt(lambda)
};

inline std::string to_string(CoverageMode m) {
    switch (m) {
        case CoverageMode::Ridge: return "ridge";
        case CoverageMode::RidgeRandom: return "ridge_random";
        case CoverageMode::Penalized: return "penalized";
        case CoverageMode::Mismatch: return "mismatch";
    }
    return "?";
}

struct CoverageConfig {
    std::string experiment_id = "coverage";
    CoverageMode mode = CoverageMode::Ridge;
    Design design = Design::HardInstanceBernoulli;
    int d = 5;
    std::vector<long> n_grid{10000};
    double lambda = 1e-3;
    double delta = 0.1;
    int reps = 200;
    std::uint64_t seed = 0;
    CSchedule schedule = CSchedule::Aligned;
    double c = 1.0;
    std::optional<WeightVector> theta_star;
    std::vector<double> context_atoms;  // polynomial design; empty means U[x_lo, x_hi]
    double x_lo = 0.5, x_hi = 2.0;
    double s_lo = 0.0, s_hi = 2.0;
    int n_nodes = kDefaultIntervalNodes;
    long mc_per_step = 1000;
    double q = 0.1;  // mismatch weight
    int threads = 1;
};

struct CoverageRow {
    long n = 0;
    int reps = 0;
    int covered = 0;
    int failures = 0;
    double coverage = 0.0;
    double mean_error = 0.0;
    double mean_bound = 0.0;
    int dominance_violations = 0;  // penalized: f(theta_check) > f(ridge)
    double max_mismatch_norm = 0.0;
    double mu_min_sigma_n = 0.0;
    double burn_in = 0.0;  // 32 d^2 log(d / delta) / sigma_min^2
};

struct CoverageReport {
    std::string mode;
    double delta = 0.0;
    double sigma_min = 0.0;
    std::vector<CoverageRow> rows;
    std::vector<ExperimentRecord> records;
};

inline CoverageReport run_coverage_experiment(const CoverageConfig& cfg) {
    require(cfg.delta > 0.0 && cfg.delta < 1.0, "delta must lie in (0, 1)", "delta");
    require(cfg.reps >= 1, "reps must be >= 1", "reps");
    require(!cfg.n_grid.empty(), "n_grid must be non-empty", "n_grid");
    for (long n : cfg.n_grid) require(n >= 1, "every n must be >= 1", "n_grid");
    if (cfg.mode == CoverageMode::Penalized) require(cfg.lambda >= 0.0, "lambda must be >= 0", "lambda");
    else require(cfg.lambda > 0.0, "lambda must be > 0", "lambda");
    require(cfg.mode != CoverageMode::Mismatch || cfg.design == Design::PolynomialRandom,
            "mismatch coverage runs on the polynomial design", "design");

    const int d = cfg.d;
    const WeightVector theta = cfg.theta_star ? *cfg.theta_star : default_theta_star(d);
    require(theta.size() == d, "theta_star dimension must equal d", "theta_star");
    require_simplex(theta, "theta_star");
    const auto setup = detail::make_design(cfg.design, d, cfg.s_lo, cfg.s_hi, cfg.n_nodes);
    const ContextDistribution contexts = cfg.context_atoms.empty() ? detail::uniform_contexts(cfg.x_lo, cfg.x_hi)
                                                                   : detail::atom_contexts(cfg.context_atoms);
    for (double x : cfg.context_atoms) require(x > 0.0, "context atoms must be > 0", "context_atoms");
    const BasisFamily phi_e = cosine_mismatch_component(cfg.s_hi);

    Matrix sigma_mean;
    if (cfg.design == Design::PolynomialRandom)
        sigma_mean = population_gram_mc(setup.basis, contexts, setup.measure, 1, cfg.mc_per_step, cfg.seed).Sigma;

    CoverageReport report;
    report.mode = to_string(cfg.mode);
    report.delta = cfg.delta;
    report.sigma_min = sigma_mean.size() ? min_eigenvalue(sigma_mean) : 0.0;

    const std::uint64_t exp_stream = detail::stable_hash(cfg.experiment_id);
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
        const long n = cfg.n_grid[g];
        std::vector<Context> fixed;
        if (cfg.design == Design::HardInstanceBernoulli) fixed = hard_instance_contexts(d, n, cfg.schedule, cfg.c);

        std::vector<ExperimentRecord> recs(static_cast<std::size_t>(cfg.reps));
        detail::parallel_for(recs.size(), cfg.threads, [&](std::size_t r) {
            const std::uint64_t key = Rng(cfg.seed, {exp_stream, g, r}).key();
            ExperimentRecord rec{cfg.experiment_id, to_string(setup.scheme), d, n, cfg.lambda, static_cast<int>(r), key,
                                 {}, false, {}};
            try {
                Dataset data;
                if (cfg.design == Design::HardInstanceBernoulli) {
                    data = sample_scheme1(
                        setup.basis, [&](const std::vector<Sample>& h, Rng&) { return fixed[h.size()]; }, theta, n, key);
                } else if (cfg.mode == CoverageMode::Mismatch) {
                    data = sample_mismatched(setup.basis, phi_e, cfg.q, theta, contexts, n, key, setup.measure);
                } else {
                    data = sample_scheme2(setup.basis, contexts, theta, n, key);
                }
                GramState state = GramState::empty(d);
                for (const auto& s : data.pairs) state.add(setup.basis, s.x, s.y, setup.measure);
                const Matrix sigma_n = cfg.design == Design::HardInstanceBernoulli
                                           ? state.U
                                           : Matrix(static_cast<double>(n) * sigma_mean);

                double error = 0.0, bound = 0.0;
                switch (cfg.mode) {
                    case CoverageMode::Ridge: {
                        error = weighted_norm(ridge_estimate(state, cfg.lambda) - theta, regularized_gram(state, cfg.lambda));
                        bound = epsilon_lambda(static_cast<double>(n), d, cfg.delta, cfg.lambda, theta.norm());
                        break;
                    }
                    case CoverageMode::RidgeRandom: {
                        error = weighted_norm(ridge_estimate(state, cfg.lambda) - theta, sigma_n);
                        bound = std::sqrt(2.0) * epsilon_lambda(static_cast<double>(n), d, cfg.delta, cfg.lambda, theta.norm());
                        break;
                    }
                    case CoverageMode::Penalized: {
                        const double pen = delta_nU_default(n, d, cfg.delta);
                        const auto res = penalized_estimate(state, cfg.lambda, pen);
                        const Matrix A = regularized_gram(state, cfg.lambda);
                        const double f_check = penalized_objective(A, state.u, pen, res.theta);
                        const double f_ridge =
                            penalized_objective(A, state.u, pen, ridge_estimate(state, std::max(cfg.lambda, 1e-8)));
                        rec.metrics.emplace_back("objective_gap", f_check - f_ridge);
                        rec.metrics.emplace_back("dominance_ok", f_check <= f_ridge + 1e-9 * (1.0 + f_ridge) ? 1.0 : 0.0);
                        error = (res.theta - theta).norm();
                        bound = penalized_bound(static_cast<double>(n), d, cfg.delta, min_eigenvalue(sigma_n), theta.norm());
                        break;
                    }
                    case CoverageMode::Mismatch: {
                        error = weighted_norm(ridge_estimate(state, cfg.lambda) - theta, regularized_gram(state, cfg.lambda));
                        const double eps = epsilon_lambda(static_cast<double>(n), d, cfg.delta, cfg.lambda, theta.norm());
                        rec.metrics.emplace_back("E_n_norm", data.E_n.norm());
                        bound = mismatch_bound(eps, data.E_n.norm(), cfg.lambda);
                        break;
                    }
                }
                rec.metrics.emplace_back("error", error);
                rec.metrics.emplace_back("bound", bound);
                rec.metrics.emplace_back("covered", error <= bound ? 1.0 : 0.0);
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.error = e.what();
                rec.metrics.emplace_back("covered", std::numeric_limits<double>::quiet_NaN());
            }
            recs[r] = std::move(rec);
        });

        CoverageRow row;
        row.n = n;
        row.reps = cfg.reps;
        const Matrix sigma_n_pop = static_cast<double>(n) * sigma_mean;
        if (sigma_mean.size()) row.mu_min_sigma_n = min_eigenvalue(sigma_n_pop);
        if (report.sigma_min > 0.0)
            row.burn_in = 32.0 * d * d * std::log(d / cfg.delta) / (report.sigma_min * report.sigma_min);
        for (const auto& rec : recs) {
            if (rec.failed) {
                ++row.failures;
                continue;
            }
            for (const auto& [name, v] : rec.metrics) {
                if (name == "covered") row.covered += v == 1.0;
                else if (name == "error") row.mean_error += v;
                else if (name == "bound") row.mean_bound += v;
                else if (name == "dominance_ok") row.dominance_violations += v != 1.0;
                else if (name == "E_n_norm") row.max_mismatch_norm = std::max(row.max_mismatch_norm, v);
            }
        }
        const int ok = cfg.reps - row.failures;
        row.coverage = static_cast<double>(row.covered) / cfg.reps;
        if (ok > 0) {
            row.mean_error /= ok;
            row.mean_bound /= ok;
        }
        report.rows.push_back(row);
        for (auto& r : recs) report.records.push_back(std::move(r));
    }
    return report;
}

}  // namespace cdfreg
