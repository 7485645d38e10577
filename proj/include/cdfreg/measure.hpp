#pragma once

// Probability measures on the outcome support S, realized as quadrature rules.

#include "cdfreg/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace cdfreg {

enum class MeasureKind { UniformInterval, Gaussian, Counting };

inline constexpr int kDefaultIntervalNodes = 64;
inline constexpr int kDefaultGaussianNodes = 64;

// A node/weight table. Weights of a probability measure sum to one.
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Golub-Welsch on a symmetric Jacobi matrix with zero diagonal. `offdiag(k)`
// is the k-th recurrence coefficient, k = 1..n-1. Weights are recomputed from
// the Christoffel function of the orthonormal family, which is more accurate
// than squaring eigenvector components.
template <typename OffDiag, typename Orthonormal>
QuadRule golub_welsch(int n, OffDiag offdiag, Orthonormal orthonormal) {
    Matrix jacobi = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k - 1, k) = offdiag(k);
        jacobi(k, k - 1) = offdiag(k);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi, Eigen::EigenvaluesOnly);
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = eig.eigenvalues()(i);
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / orthonormal(x, n);
        total += rule.weights[i];
    }
    for (double& w : rule.weights) w /= total;
    return rule;
}

// Gauss-Legendre rule for the uniform probability measure on [-1, 1].
inline QuadRule gauss_legendre_unit(int n) {
    auto offdiag = [](int k) { return k / std::sqrt(4.0 * k * k - 1.0); };
    // sum_{k<n} p_k(x)^2 with p_k = sqrt(2k+1) P_k
    auto christoffel = [](double x, int n_terms) {
        double prev = 1.0, cur = x, sum = 1.0;
        if (n_terms > 1) sum += 3.0 * x * x;
        for (int k = 1; k + 1 < n_terms; ++k) {
            const double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
            prev = cur;
            cur = next;
            sum += (2.0 * (k + 1) + 1.0) * cur * cur;
        }
        return sum;
    };
    return golub_welsch(n, offdiag, christoffel);
}

// Gauss-Hermite rule for the standard normal probability measure.
inline QuadRule gauss_hermite_std(int n) {
    auto offdiag = [](int k) { return std::sqrt(static_cast<double>(k)); };
    auto christoffel = [](double x, int n_terms) {
        double prev = 1.0, cur = x, sum = 1.0;
        if (n_terms > 1) sum += x * x;
        for (int k = 1; k + 1 < n_terms; ++k) {
            const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                                std::sqrt(static_cast<double>(k + 1));
            prev = cur;
            cur = next;
            sum += cur * cur;
        }
        return sum;
    };
    return golub_welsch(n, offdiag, christoffel);
}

}  // namespace detail

class QuadMeasure {
public:
    MeasureKind kind() const { return kind_; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }
    std::span<const double> nodes() const { return rule_.nodes; }
    std::span<const double> weights() const { return rule_.weights; }
    const QuadRule& rule() const { return rule_; }
    int n_nodes() const { return n_nodes_; }

    // Kind-specific parameters: interval endpoints, Gaussian center/variance,
    // or the atom list.
    double a() const { return a_; }
    double b() const { return b_; }
    double center() const { return a_; }
    double variance() const { return b_; }
    const std::vector<double>& points() const { return points_; }

    // Gauss-Legendre panel rule on [-1, 1] used by split_rule.
    const QuadRule& panel() const { return *panel_; }

    friend QuadMeasure make_uniform_measure(double a, double b, int n_nodes);
    friend QuadMeasure make_gaussian_measure(double c, double var, int n_nodes);
    friend QuadMeasure make_counting_measure(std::vector<double> points);

private:
    MeasureKind kind_ = MeasureKind::Counting;
    double lo_ = 0.0, hi_ = 0.0;
    double a_ = 0.0, b_ = 0.0;
    int n_nodes_ = 0;
    std::vector<double> points_;
    QuadRule rule_;
    std::shared_ptr<const QuadRule> panel_;
};

// Gauss-Legendre on [a, b]; the 1/(b-a) density is folded into the weights.
inline QuadMeasure make_uniform_measure(double a, double b, int n_nodes = kDefaultIntervalNodes) {
    require(std::isfinite(a) && std::isfinite(b) && a < b, "uniform measure needs finite a < b", "support");
    require(n_nodes >= 1, "uniform measure needs at least 1 node", "n_nodes");
    QuadMeasure m;
    m.kind_ = MeasureKind::UniformInterval;
    m.lo_ = m.a_ = a;
    m.hi_ = m.b_ = b;
    m.n_nodes_ = n_nodes;
    m.rule_ = detail::gauss_legendre_unit(n_nodes);
    m.panel_ = std::make_shared<const QuadRule>(m.rule_);
    for (double& x : m.rule_.nodes) x = a + 0.5 * (b - a) * (x + 1.0);
    return m;
}

inline QuadMeasure make_gaussian_measure(double c, double var, int n_nodes = kDefaultGaussianNodes) {
    require(std::isfinite(c), "gaussian measure needs a finite center", "center");
    require(std::isfinite(var) && var > 0, "gaussian measure needs variance > 0", "variance");
    require(n_nodes >= 1, "gaussian measure needs at least 1 node", "n_nodes");
    QuadMeasure m;
    m.kind_ = MeasureKind::Gaussian;
    m.lo_ = -std::numeric_limits<double>::infinity();
    m.hi_ = std::numeric_limits<double>::infinity();
    m.a_ = c;
    m.b_ = var;
    m.n_nodes_ = n_nodes;
    m.rule_ = detail::gauss_hermite_std(n_nodes);
    m.panel_ = std::make_shared<const QuadRule>(detail::gauss_legendre_unit(n_nodes));
    const double sd = std::sqrt(var);
    for (double& x : m.rule_.nodes) x = c + sd * x;
    return m;
}

inline QuadMeasure make_counting_measure(std::vector<double> points) {
    require(!points.empty(), "counting measure needs at least one point", "points");
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(std::isfinite(points[i]), "counting measure points must be finite", "points");
        if (i > 0) require(points[i - 1] < points[i], "counting measure points must be strictly increasing", "points");
    }
    QuadMeasure m;
    m.kind_ = MeasureKind::Counting;
    m.lo_ = points.front();
    m.hi_ = points.back();
    m.n_nodes_ = static_cast<int>(points.size());
    m.rule_.nodes = points;
    m.rule_.weights.assign(points.size(), 1.0 / static_cast<double>(points.size()));
    m.points_ = std::move(points);
    return m;
}

template <typename F>
double integrate_rule(F&& f, const QuadRule& rule) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double v = f(rule.nodes[k]);
        if (!std::isfinite(v)) throw NumericalError("integrand is not finite at t = " + std::to_string(rule.nodes[k]));
        acc += rule.weights[k] * v;
    }
    return acc;
}

template <typename F>
double integrate(F&& f, const QuadMeasure& m) {
    return integrate_rule(std::forward<F>(f), m.rule());
}

// Composite rule that treats every breakpoint inside the support as a panel
// boundary, so integrands with jumps or kinks there keep Gaussian accuracy.
// Interval measures get one Gauss-Legendre panel per piece. The Gaussian
// measure is cut to |z| <= 12 standard deviations, split further at
// z = 0, +-4, +-8, and each piece gets Gauss-Legendre nodes weighted by the
// normal density; without interior breakpoints its Gauss-Hermite rule is used
// unchanged. Counting measures are exact already.
inline QuadRule split_rule(const QuadMeasure& m, std::vector<double> breakpoints) {
    if (m.kind() == MeasureKind::Counting) return m.rule();

    const bool interval = m.kind() == MeasureKind::UniformInterval;
    constexpr double kTail = 12.0;
    const double sd = interval ? 0.0 : std::sqrt(m.variance());
    std::vector<double> cuts;  // t for intervals, z = (t - c) / sd for the Gaussian
    for (double t : breakpoints) {
        if (!std::isfinite(t)) continue;
        const double s = interval ? t : (t - m.center()) / sd;
        if (interval ? (s > m.a() && s < m.b()) : std::abs(s) < kTail) cuts.push_back(s);
    }
    if (!interval) {
        if (cuts.empty()) return m.rule();
        for (double z : {-8.0, -4.0, 0.0, 4.0, 8.0}) cuts.push_back(z);
    }
    const double lo = interval ? m.a() : -kTail;
    const double hi = interval ? m.b() : kTail;
    cuts.push_back(lo);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const QuadRule& unit = m.panel();
    QuadRule out;
    out.nodes.reserve(unit.nodes.size() * (cuts.size() - 1));
    out.weights.reserve(out.nodes.capacity());
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double left = cuts[p], right = cuts[p + 1];
        if (!(right > left)) continue;
        for (std::size_t k = 0; k < unit.nodes.size(); ++k) {
            const double s = left + 0.5 * (right - left) * (unit.nodes[k] + 1.0);
            if (interval) {
                out.nodes.push_back(s);
                out.weights.push_back((right - left) / (hi - lo) * unit.weights[k]);
            } else {
                out.nodes.push_back(m.center() + sd * s);
                out.weights.push_back((right - left) * unit.weights[k] * std::exp(-0.5 * s * s) /
                                      std::sqrt(2.0 * std::numbers::pi));
            }
        }
    }
    return out;
}

// m([lo, hi)) for the half-open interval; exact for every kind.
inline double measure_of(const QuadMeasure& m, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    switch (m.kind()) {
        case MeasureKind::UniformInterval: {
            const double l = std::max(lo, m.a()), h = std::min(hi, m.b());
            return h > l ? (h - l) / (m.b() - m.a()) : 0.0;
        }
        case MeasureKind::Gaussian:
            return normal_cdf(hi, m.center(), m.variance()) - normal_cdf(lo, m.center(), m.variance());
        case MeasureKind::Counting: {
            double acc = 0.0;
            const double w = 1.0 / static_cast<double>(m.points().size());
            for (double s : m.points())
                if (s >= lo && s < hi) acc += w;
            return acc;
        }
    }
    return 0.0;
}

inline std::string to_string(MeasureKind k) {
    switch (k) {
        case MeasureKind::UniformInterval: return "uniform";
        case MeasureKind::Gaussian: return "gaussian";
        case MeasureKind::Counting: return "counting";
    }
    return "?";
}

inline nlohmann::json to_json(const QuadMeasure& m) {
    nlohmann::json j;
    j["kind"] = to_string(m.kind());
    switch (m.kind()) {
        case MeasureKind::UniformInterval: j["params"] = {{"a", m.a()}, {"b", m.b()}}; break;
        case MeasureKind::Gaussian: j["params"] = {{"center", m.center()}, {"variance", m.variance()}}; break;
        case MeasureKind::Counting: j["params"] = {{"points", m.points()}}; break;
    }
    j["n_nodes"] = m.n_nodes();
    return j;
}

// Inverse of to_json; nodes and weights are regenerated.
inline QuadMeasure measure_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("kind") && j["kind"].is_string(), "measure needs a string 'kind'", "measure.kind");
    const std::string kind = j["kind"];
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    auto number = [&](const char* key) {
        require(params.contains(key) && params[key].is_number(), std::string("measure.params.") + key + " must be a number",
                std::string("measure.params.") + key);
        return params[key].get<double>();
    };
    if (kind == "uniform") {
        const int n = j.value("n_nodes", kDefaultIntervalNodes);
        return make_uniform_measure(number("a"), number("b"), n);
    }
    if (kind == "gaussian") {
        const int n = j.value("n_nodes", kDefaultGaussianNodes);
        return make_gaussian_measure(number("center"), number("variance"), n);
    }
    if (kind == "counting") {
        require(params.contains("points") && params["points"].is_array(), "measure.params.points must be an array",
                "measure.params.points");
        return make_counting_measure(params["points"].get<std::vector<double>>());
    }
    throw DomainError("unknown measure kind '" + kind + "'", "measure.kind");
}

}  // namespace cdfreg
