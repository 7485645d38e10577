#pragma once

// Sufficient statistics U_n = sum_j int Phi_j Phi_j' dm and
// u_n = sum_j int 1{y_j <= t} Phi_j dm, and the population Gram Sigma_n.

#include "cdfreg/basis.hpp"
#include "cdfreg/measure.hpp"
#include "cdfreg/rng.hpp"

#include <json.hpp>

#include <functional>
#include <variant>
#include <vector>

namespace cdfreg {

enum class GramMethod {
    Auto,        // closed form where one exists, split quadrature otherwise
    Quadrature,  // always split quadrature
};

namespace detail {

// Bernoulli-type Phi is 0 on (-inf, 0), q = 1 - p on [0, 1) and 1 on [1, inf).
inline Matrix bernoulli_gram(const Vector& p, const QuadMeasure& m) {
    const Vector q = Vector::Ones(p.size()) - p;
    const double mid = measure_of(m, 0.0, 1.0);
    const double top = measure_of(m, 1.0, std::numeric_limits<double>::infinity());
    Matrix g = mid * (q * q.transpose());
    if (top > 0.0) g += top * Matrix::Ones(p.size(), p.size());
    return g;
}

inline Vector bernoulli_response(const Vector& p, double y, const QuadMeasure& m) {
    const Vector q = Vector::Ones(p.size()) - p;
    const double inf = std::numeric_limits<double>::infinity();
    const double mid = measure_of(m, std::max(y, 0.0), 1.0);
    const double top = measure_of(m, std::max(y, 1.0), inf);
    return mid * q + top * Vector::Ones(p.size());
}

// int_l^h (x t)^r dt over [l, h] inside [0, 1/x].
inline double power_integral(double x, double r, double l, double h) {
    if (!(h > l)) return 0.0;
    return std::pow(x, r) * (std::pow(h, r + 1.0) - std::pow(l, r + 1.0)) / (r + 1.0);
}

// Polynomial basis against the uniform measure on [a, b]: (x t)^{r_i} on
// [0, 1/x] and 1 above 1/x. Integrals start at `from` (the outcome y for the
// response vector).
inline Matrix polynomial_gram(int d, double x, const QuadMeasure& m) {
    const double a = m.a(), b = m.b(), kink = 1.0 / x;
    const double L = std::max(a, 0.0), H = std::min(b, kink), top = std::max(0.0, b - std::max(a, kink));
    Vector r(d);
    for (int i = 0; i < d; ++i) r(i) = polynomial_exponent(d, i + 1);
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int k = 0; k <= i; ++k) g(i, k) = g(k, i) = (power_integral(x, r(i) + r(k), L, H) + top) / (b - a);
    return g;
}

inline Vector polynomial_response(int d, double x, double y, const QuadMeasure& m) {
    const double a = m.a(), b = m.b(), kink = 1.0 / x;
    const double L = std::max({a, 0.0, y}), H = std::min(b, kink), top = std::max(0.0, b - std::max({a, kink, y}));
    Vector out(d);
    for (int i = 0; i < d; ++i) out(i) = (power_integral(x, polynomial_exponent(d, i + 1), L, H) + top) / (b - a);
    return out;
}

inline bool polynomial_closed_form(const BasisFamily& basis, const QuadMeasure& m) {
    return basis.kind() == BasisKind::Polynomial && m.kind() == MeasureKind::UniformInterval;
}

}  // namespace detail

// int_S Phi(x, t) Phi(x, t)' m(dt)
inline Matrix gram_matrix_of_context(const BasisFamily& basis, const Context& x, const QuadMeasure& m,
                                     GramMethod method = GramMethod::Auto) {
    basis.validate_context(x);
    if (method == GramMethod::Auto)
    {
        if (auto p = basis.success_probabilities(x)) return detail::bernoulli_gram(*p, m);
        if (detail::polynomial_closed_form(basis, m)) return detail::polynomial_gram(basis.dim(), x(0), m);
    }

    const QuadRule rule = split_rule(m, basis.breakpoints(x));
    const int d = basis.dim();
    Matrix g = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const Vector phi = basis.eval(x, rule.nodes[k]);
        g.selfadjointView<Eigen::Lower>().rankUpdate(phi, rule.weights[k]);
    }
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
}

// int_S 1{y <= t} Phi(x, t) m(dt); interval measures are split at y.
inline Vector response_vector_of_sample(const BasisFamily& basis, const Context& x, double y, const QuadMeasure& m,
                                        GramMethod method = GramMethod::Auto) {
    require(std::isfinite(y), "outcome y must be finite", "y");
    basis.validate_context(x);
    if (method == GramMethod::Auto)
    {
        if (auto p = basis.success_probabilities(x)) return detail::bernoulli_response(*p, y, m);
        if (detail::polynomial_closed_form(basis, m)) return detail::polynomial_response(basis.dim(), x(0), y, m);
    }

    std::vector<double> cuts = basis.breakpoints(x);
    cuts.push_back(y);
    const QuadRule rule = split_rule(m, std::move(cuts));
    Vector r = Vector::Zero(basis.dim());
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        if (y <= rule.nodes[k]) r += rule.weights[k] * basis.eval(x, rule.nodes[k]);
    return r;
}

struct GramState {
    int d = 0;
    long n = 0;
    Matrix U;
    Vector u;

    static GramState empty(int d) {
        require(d >= 1, "gram state dimension must be >= 1", "d");
        return GramState{d, 0, Matrix::Zero(d, d), Vector::Zero(d)};
    }

    // Adds one (x, y) observation; U is re-symmetrized afterwards.
    GramState& add(const BasisFamily& basis, const Context& x, double y, const QuadMeasure& m,
                   GramMethod method = GramMethod::Auto) {
        require(basis.dim() == d, "basis dimension does not match the gram state", "d");
        U += gram_matrix_of_context(basis, x, m, method);
        u += response_vector_of_sample(basis, x, y, m, method);
        U = 0.5 * (U + U.transpose()).eval();
        ++n;
        return *this;
    }

    // Partial states from disjoint sample sets combine by addition.
    GramState& merge(const GramState& other) {
        require(other.d == d, "cannot merge gram states of different dimension", "d");
        U += other.U;
        u += other.u;
        n += other.n;
        return *this;
    }
};

inline GramState accumulate(GramState state, const BasisFamily& basis, const Context& x, double y, const QuadMeasure& m,
                            GramMethod method = GramMethod::Auto) {
    state.add(basis, x, y, m, method);
    return state;
}

inline Matrix regularized_gram(const GramState& state, double lambda) {
    require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0", "lambda");
    return state.U + lambda * Matrix::Identity(state.d, state.d);
}

inline nlohmann::json to_json(const GramState& s) {
    std::vector<double> flat(s.U.data(), s.U.data() + s.U.size());  // column-major; U is symmetric
    return {{"d", s.d}, {"n", s.n}, {"U", flat}, {"u", std::vector<double>(s.u.data(), s.u.data() + s.u.size())}};
}

inline GramState gram_state_from_json(const nlohmann::json& j) {
    GramState s = GramState::empty(j.at("d").get<int>());
    s.n = j.at("n").get<long>();
    const auto flat = j.at("U").get<std::vector<double>>();
    const auto u = j.at("u").get<std::vector<double>>();
    require(flat.size() == static_cast<std::size_t>(s.d * s.d) && u.size() == static_cast<std::size_t>(s.d),
            "gram state dump has inconsistent sizes", "U");
    s.U = Eigen::Map<const Matrix>(flat.data(), s.d, s.d);
    s.u = Eigen::Map<const Vector>(u.data(), s.d);
    return s;
}

// Context distribution for random-design experiments: either a finite atom
// list (exact expectations) or a stationary sampler.
struct ContextAtoms {
    std::vector<Context> contexts;
    std::vector<double> probs;
};
using ContextSampler = std::function<Context(Rng&)>;
using ContextDistribution = std::variant<ContextAtoms, ContextSampler>;

inline Context draw_context(const ContextDistribution& dist, Rng& rng) {
    if (const auto* atoms = std::get_if<ContextAtoms>(&dist)) {
        const double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t k = 0; k < atoms->contexts.size(); ++k) {
            acc += atoms->probs[k];
            if (u < acc) return atoms->contexts[k];
        }
        return atoms->contexts.back();
    }
    return std::get<ContextSampler>(dist)(rng);
}

struct PopulationGram {
    Matrix Sigma;
    long n = 0;
    int d = 0;
    long mc_samples = 0;  // 0 when computed exactly
};

// Sigma_n = sum_{j<=n} E[int Phi_j Phi_j' dm] for identically distributed
// contexts: exact average over atoms, or a Monte Carlo mean over
// mc_per_step draws. Every step shares the same expectation, so it is
// computed once and multiplied by n.
inline PopulationGram population_gram_mc(const BasisFamily& basis, const ContextDistribution& dist, const QuadMeasure& m,
                                         long n, long mc_per_step, std::uint64_t seed) {
    require(n >= 0, "n must be >= 0", "n");
    const int d = basis.dim();
    PopulationGram out{Matrix::Zero(d, d), n, d, 0};
    Matrix mean = Matrix::Zero(d, d);
    if (const auto* atoms = std::get_if<ContextAtoms>(&dist)) {
        require(!atoms->contexts.empty() && atoms->contexts.size() == atoms->probs.size(),
                "context atoms need one probability per context", "contexts");
        double total = 0.0;
        for (double p : atoms->probs) {
            require(p >= 0.0, "context probabilities must be >= 0", "probs");
            total += p;
        }
        require(std::abs(total - 1.0) <= 1e-9, "context probabilities must sum to 1", "probs");
        for (std::size_t k = 0; k < atoms->contexts.size(); ++k)
            mean += atoms->probs[k] * gram_matrix_of_context(basis, atoms->contexts[k], m);
    } else {
        require(mc_per_step >= 1, "mc_per_step must be >= 1", "mc_per_step");
        const long draws = std::max<long>(1, std::min<long>(n, 1) * mc_per_step);
        Rng rng(seed, {0x5167'6d61ULL});
        for (long k = 0; k < draws; ++k) mean += gram_matrix_of_context(basis, draw_context(dist, rng), m);
        mean /= static_cast<double>(draws);
        out.mc_samples = draws;
    }
    out.Sigma = static_cast<double>(n) * 0.5 * (mean + mean.transpose());
    return out;
}

}  // namespace cdfreg
