#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace cdfreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A context x. Families interpret it differently: Bernoulli reads it as the
// success-probability vector, Polynomial reads x(0), the regression families
// read one coordinate per basis function.
using Context = Eigen::VectorXd;

// d-dimensional coefficient vector. Simplex membership is a predicate, not an
// invariant: the ridge estimate is allowed to leave the simplex.
using WeightVector = Eigen::VectorXd;

inline constexpr double kSimplexTol = 1e-9;

// Base of every error thrown by the library. `field` names the offending
// input when there is one (the CLI reports it in its error JSON).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::string field = {})
        : std::runtime_error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Precondition violation on caller-supplied values.
class DomainError : public Error {
public:
    using Error::Error;
};

// Linear-algebra failure: singular Gram, non-PD matrix, failed factorization.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularGram : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline void require(bool ok, const std::string& what, const std::string& field = {}) {
    if (!ok) throw DomainError(what, field);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline bool in_simplex(const Vector& v, double tol = kSimplexTol) {
    if (v.size() == 0 || !v.allFinite()) return false;
    return std::abs(v.sum() - 1.0) <= tol && v.minCoeff() >= -tol;
}

inline void require_simplex(const Vector& theta, const std::string& field = "theta") {
    require(in_simplex(theta), "weight vector is not in the probability simplex", field);
}

inline bool is_symmetric(const Matrix& a, double tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

// Standard normal CDF. std::erfc keeps full relative accuracy in the tails.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_cdf(double t, double mean, double var) {
    return normal_cdf((t - mean) / std::sqrt(var));
}

inline double laplace_cdf(double t, double loc, double scale) {
    const double z = (t - loc) / scale;
    return z < 0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

inline double logistic(double a) {
    return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

// CDF of Bernoulli(p): atoms at 0 (mass 1-p) and 1 (mass p).
inline double bernoulli_cdf(double t, double p) {
    if (t < 0.0) return 0.0;
    if (t < 1.0) return 1.0 - p;
    return 1.0;
}

}  // namespace cdfreg
