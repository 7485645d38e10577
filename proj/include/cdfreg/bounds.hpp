#pragma once

#include "cdfreg/estimators.hpp"
#include "cdfreg/measure.hpp"

#include <json.hpp>

#include <functional>
#include <utility>
#include <vector>

namespace cdfreg {

namespace detail {
inline void require_delta(double delta) { require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)", "delta"); }
}  // namespace detail

// sqrt(d log(1 + n / lambda) + 2 log(1 / delta)) + sqrt(lambda) ||theta*||
inline double epsilon_lambda(double n, int d, double delta, double lambda, double theta_star_norm) {
    detail::require_delta(delta);
    require(n >= 0.0, "n must be >= 0", "n");
    require(d >= 1, "d must be >= 1", "d");
    require(lambda > 0.0, "lambda must be > 0", "lambda");
    require(theta_star_norm >= 0.0, "theta* norm must be >= 0", "theta_star_norm");
    return std::sqrt(d * std::log1p(n / lambda) + 2.0 * std::log(1.0 / delta)) + std::sqrt(lambda) * theta_star_norm;
}

// (sqrt(d) + sqrt(8 d log(1/delta)) + (4/3) sqrt(d/n) log(1/delta)) / sqrt(tau)
inline double epsilon_unreg(double n, int d, double delta, double tau) {
    detail::require_delta(delta);
    require(n > 0.0, "n must be > 0", "n");
    require(d >= 1, "d must be >= 1", "d");
    require(tau > 0.0, "tau must be > 0", "tau");
    const double l = std::log(1.0 / delta);
    return (std::sqrt(d) + std::sqrt(8.0 * d * l) + 4.0 / 3.0 * std::sqrt(d / n) * l) / std::sqrt(tau);
}

// Euclidean error bound for the penalized estimator with lambda = 0.
inline double penalized_bound(double n, int d, double delta, double mu_min_sigma_n, double theta_star_norm) {
    detail::require_delta(delta);
    require(n > 0.0, "n must be > 0", "n");
    require(d >= 1, "d must be >= 1", "d");
    require(mu_min_sigma_n > 0.0, "mu_min(Sigma_n) must be > 0", "mu_min_Sigma_n");
    require(theta_star_norm >= 0.0, "theta* norm must be >= 0", "theta_star_norm");
    const double l = std::log(1.0 / delta);
    const double first = 2.0 * d * std::sqrt(8.0 * n * std::log(d / delta)) * theta_star_norm;
    const double second = 2.0 * (std::sqrt(n * d) + std::sqrt(8.0 * n * d * l) + 4.0 / 3.0 * std::sqrt(d) * l);
    return (first + second) / mu_min_sigma_n;
}

// sqrt(sum_i log(1 + lambda_i sigma_i^2) + 2 log(1/delta)) + ||theta*||_sigma
inline double hilbert_bound(const std::vector<double>& eigenvalues, const std::vector<double>& sigmas, double delta,
                            double theta_star_sigma_norm) {
    detail::require_delta(delta);
    require(eigenvalues.size() == sigmas.size(), "eigenvalue and sigma lists differ in length", "sigmas");
    double s = 0.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        require(eigenvalues[i] >= 0.0, "eigenvalues must be >= 0", "eigenvalues");
        require(sigmas[i] != 0.0, "every sigma_i must be nonzero", "sigmas");
        s += std::log1p(eigenvalues[i] * sigmas[i] * sigmas[i]);
    }
    return std::sqrt(s + 2.0 * std::log(1.0 / delta)) + theta_star_sigma_norm;
}

// eps_lambda + ||E_n|| / sqrt(lambda); the random-design variant takes ||B_n||
// and returns sqrt(2) eps_lambda + sqrt(2 / lambda) ||B_n||.
inline double mismatch_bound(double eps_lambda_val, double mismatch_norm, double lambda, bool random_design = false) {
    require(lambda > 0.0, "lambda must be > 0", "lambda");
    require(mismatch_norm >= 0.0, "mismatch norm must be >= 0", "E_n");
    if (random_design) return std::sqrt(2.0) * eps_lambda_val + std::sqrt(2.0 / lambda) * mismatch_norm;
    return eps_lambda_val + mismatch_norm / std::sqrt(lambda);
}

inline double weighted_norm(const Vector& v, const Matrix& A) {
    require(A.rows() == A.cols() && A.rows() == v.size(), "weighted norm needs a d x d matrix", "A");
    require(is_symmetric(A), "weighted norm needs a symmetric matrix", "A");
    const double q = v.dot(A * v);
    if (q < -1e-10 * std::max(1.0, v.squaredNorm() * A.cwiseAbs().maxCoeff()))
        throw NumericalError("quadratic form is negative; A is not PSD", "A");
    return std::sqrt(std::max(q, 0.0));
}

inline double min_eigenvalue(const Matrix& A) {
    require(A.rows() == A.cols() && A.rows() >= 1, "min_eigenvalue needs a non-empty square matrix", "A");
    require(is_symmetric(A), "min_eigenvalue needs a symmetric matrix", "A");
    return Eigen::SelfAdjointEigenSolver<Matrix>(A, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

using Cdf = std::function<double(double)>;

// Declared jumps, 512 evenly spaced points and both endpoints, sorted and unique.
inline std::vector<double> ks_grid(double lo, double hi, std::vector<double> jumps, int uniform_points = 512) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, "KS grid needs finite lo <= hi", "grid");
    for (int k = 0; k < uniform_points; ++k)
        jumps.push_back(lo + (hi - lo) * k / std::max(1, uniform_points - 1));
    jumps.push_back(lo);
    jumps.push_back(hi);
    std::sort(jumps.begin(), jumps.end());
    jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
    return jumps;
}

// max over the grid of |F1 - F2| at t and just left of t.
inline double ks_distance(const Cdf& F1, const Cdf& F2, const std::vector<double>& grid) {
    require(!grid.empty(), "KS distance needs a non-empty grid", "grid");
    double out = 0.0;
    for (double t : grid) {
        const double left = t - 1e-12 * std::max(1.0, std::abs(t));
        out = std::max({out, std::abs(F1(t) - F2(t)), std::abs(F1(left) - F2(left))});
    }
    return out;
}

using ContextualCdf = std::function<double(const Context&, double)>;
using JumpFn = std::function<std::vector<double>(const Context&)>;

// (1/n) sum_j int_S (1{y_j <= t} - F_hat(x_j, t))^2 m(dt), with the quadrature
// split at y_j and at the declared jumps of F_hat(x_j, .).
inline double l2_error_crps(const std::vector<Sample>& samples, const ContextualCdf& F_hat, const QuadMeasure& m,
                            const JumpFn& jumps = {}) {
    require(!samples.empty(), "L2 error needs at least one sample", "samples");
    double total = 0.0;
    for (const auto& s : samples) {
        std::vector<double> cuts = jumps ? jumps(s.x) : std::vector<double>{};
        cuts.push_back(s.y);
        const QuadRule rule = split_rule(m, std::move(cuts));
        total += integrate_rule(
            [&](double t) {
                const double e = (s.y <= t ? 1.0 : 0.0) - F_hat(s.x, t);
                return e * e;
            },
            rule);
    }
    return total / static_cast<double>(samples.size());
}

// Exact version for a context-free step CDF such as the ECDF: the integrand is
// piecewise constant between consecutive jumps and y.
inline double l2_error_step(const std::vector<Sample>& samples, const Ecdf& F_hat, const QuadMeasure& m) {
    require(!samples.empty(), "L2 error needs at least one sample", "samples");
    const std::vector<double> base = F_hat.jumps();
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& s : samples) {
        std::vector<double> cuts = base;
        cuts.insert(std::upper_bound(cuts.begin(), cuts.end(), s.y), s.y);
        double lo = -inf;
        for (std::size_t k = 0; k <= cuts.size(); ++k) {
            const double hi = k < cuts.size() ? cuts[k] : inf;
            if (hi > lo) {
                const double e = (s.y <= lo ? 1.0 : 0.0) - (lo == -inf ? 0.0 : F_hat(lo));
                total += e * e * measure_of(m, lo, hi);
            }
            lo = hi;
        }
    }
    return total / static_cast<double>(samples.size());
}

// OLS on (log x, log y); returns (slope, intercept).
inline std::pair<double, double> fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 2, "slope fit needs at least 2 points", "points");
    Eigen::MatrixX2d X(static_cast<Eigen::Index>(points.size()), 2);
    Vector y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t k = 0; k < points.size(); ++k) {
        require(points[k].first > 0.0 && points[k].second > 0.0, "slope fit needs positive coordinates", "points");
        X(static_cast<Eigen::Index>(k), 0) = std::log(points[k].first);
        X(static_cast<Eigen::Index>(k), 1) = 1.0;
        y(static_cast<Eigen::Index>(k)) = std::log(points[k].second);
    }
    require((X.col(0).array() != X(0, 0)).any(), "slope fit needs distinct x values", "points");
    const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
    return {beta(0), beta(1)};
}

inline nlohmann::json bound_row(const std::string& name, nlohmann::json inputs, double value) {
    return {{"bound_name", name}, {"inputs", std::move(inputs)}, {"value", value}};
}

}  // namespace cdfreg
