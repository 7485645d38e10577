#pragma once

// Contextual CDF basis families Phi(x, .) = [phi_1(x, .), ..., phi_d(x, .)]
// and the mixture CDF theta' Phi(x, t).

#include "cdfreg/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cdfreg {

enum class BasisKind { Bernoulli, Polynomial, GaussianLaplaceMix, LogisticProbitMix, Custom };

// Context is the success-probability vector p(x) itself.
struct BernoulliBasis {
    int d = 1;
};

// phi_i(x, t) = 1{t in [0, 1/x]} (x t)^{r(i)} + 1{t > 1/x}; context is (x).
struct PolynomialBasis {
    int d = 1;
};

// phi_i(x, t) = (1 - w) F_N(t; bn1_i x_i + bn0_i, sigma2_i) + w F_L(t; bl1_i x_i + bl0_i, b_i)
struct GaussianLaplaceBasis {
    double w = 0.0;
    Vector normal_coef, normal_intercept, normal_var;
    Vector laplace_coef, laplace_intercept, laplace_scale;
};

// phi_i(x, .) is the Bernoulli CDF with success probability
// w logistic(bl1_i x_i + bl0_i) + (1 - w) Phi_N(bp1_i x_i + bp0_i).
struct LogisticProbitBasis {
    double w = 0.5;
    Vector logistic_coef, logistic_intercept;
    Vector probit_coef, probit_intercept;
};

// Caller-supplied evaluator with declared support endpoints. Monotonicity is
// only spot-checked (see check_monotone).
struct CustomBasis {
    int d = 1;
    std::function<Vector(const Context&, double)> eval;
    double support_lo = 0.0;
    double support_hi = 1.0;
    std::vector<double> jumps;           // known discontinuities or kinks in t
    std::vector<double> atoms;           // non-empty for purely discrete families
    std::string name = "custom";
};

// r(i) = i for i <= (d+1)/2, else 2/(2i - d + 1); i is 1-based.
inline double polynomial_exponent(int d, int i) {
    require(d >= 1, "polynomial basis needs d >= 1", "d");
    require(i >= 1 && i <= d, "polynomial exponent index out of range", "i");
    if (2 * i <= d + 1) return static_cast<double>(i);
    return 2.0 / (2.0 * i - d + 1.0);
}

inline Vector eval_polynomial_basis(int d, double x, double t) {
    require(std::isfinite(x) && x > 0, "polynomial basis context must be > 0", "x");
    Vector out(d);
    for (int i = 1; i <= d; ++i) {
        double v;
        if (t < 0.0) v = 0.0;
        else if (t <= 1.0 / x) v = std::pow(x * t, polynomial_exponent(d, i));
        else v = 1.0;
        out(i - 1) = v;
    }
    return out;
}

inline Vector eval_bernoulli_basis(const Vector& p, double t) {
    Vector out(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        require(p(i) >= 0.0 && p(i) <= 1.0, "bernoulli success probability outside [0, 1]", "p");
        out(i) = bernoulli_cdf(t, p(i));
    }
    return out;
}

inline void validate(const GaussianLaplaceBasis& b) {
    const auto d = b.normal_coef.size();
    require(d >= 1, "gaussian_laplace basis needs d >= 1", "basis");
    require(b.normal_intercept.size() == d && b.normal_var.size() == d && b.laplace_coef.size() == d &&
                b.laplace_intercept.size() == d && b.laplace_scale.size() == d,
            "gaussian_laplace parameter vectors must share one length", "basis");
    require(b.w >= 0.0 && b.w <= 1.0, "mixture weight w outside [0, 1]", "basis.w");
    require((b.normal_var.array() > 0).all(), "gaussian variances must be > 0", "basis.normal_var");
    require((b.laplace_scale.array() > 0).all(), "laplace scales must be > 0", "basis.laplace_scale");
}

inline void validate(const LogisticProbitBasis& b) {
    const auto d = b.logistic_coef.size();
    require(d >= 1, "logistic_probit basis needs d >= 1", "basis");
    require(b.logistic_intercept.size() == d && b.probit_coef.size() == d && b.probit_intercept.size() == d,
            "logistic_probit parameter vectors must share one length", "basis");
    require(b.w >= 0.0 && b.w <= 1.0, "mixture weight w outside [0, 1]", "basis.w");
}

inline Vector eval_gaussian_laplace_basis(const GaussianLaplaceBasis& b, const Context& x, double t) {
    validate(b);
    const auto d = b.normal_coef.size();
    require(x.size() == d, "gaussian_laplace context must have one coordinate per basis function", "x");
    Vector out(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double gauss = normal_cdf(t, b.normal_coef(i) * x(i) + b.normal_intercept(i), b.normal_var(i));
        const double lap = laplace_cdf(t, b.laplace_coef(i) * x(i) + b.laplace_intercept(i), b.laplace_scale(i));
        out(i) = (1.0 - b.w) * gauss + b.w * lap;
    }
    return out;
}

inline Vector logistic_probit_success(const LogisticProbitBasis& b, const Context& x) {
    const auto d = b.logistic_coef.size();
    require(x.size() == d, "logistic_probit context must have one coordinate per basis function", "x");
    Vector p(d);
    for (Eigen::Index i = 0; i < d; ++i)
        p(i) = b.w * logistic(b.logistic_coef(i) * x(i) + b.logistic_intercept(i)) +
               (1.0 - b.w) * normal_cdf(b.probit_coef(i) * x(i) + b.probit_intercept(i));
    return p;
}

inline Vector eval_logistic_probit_basis(const LogisticProbitBasis& b, const Context& x, double t) {
    validate(b);
    return eval_bernoulli_basis(logistic_probit_success(b, x), t);
}

class BasisFamily {
public:
    using Params = std::variant<BernoulliBasis, PolynomialBasis, GaussianLaplaceBasis, LogisticProbitBasis, CustomBasis>;

    BasisFamily(Params params) : params_(std::move(params)) {
        std::visit(
            [](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, BernoulliBasis> || std::is_same_v<T, PolynomialBasis>)
                    require(p.d >= 1, "basis dimension must be >= 1", "d");
                else if constexpr (std::is_same_v<T, CustomBasis>) {
                    require(p.d >= 1, "basis dimension must be >= 1", "d");
                    require(static_cast<bool>(p.eval), "custom basis needs an evaluator", "basis");
                    require(p.support_lo < p.support_hi, "custom basis needs support_lo < support_hi", "basis");
                } else
                    validate(p);
            },
            params_);
    }

    static BasisFamily bernoulli(int d) { return BasisFamily(BernoulliBasis{d}); }
    static BasisFamily polynomial(int d) { return BasisFamily(PolynomialBasis{d}); }

    const Params& params() const { return params_; }

    BasisKind kind() const {
        return std::visit(
            [](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, BernoulliBasis>) return BasisKind::Bernoulli;
                else if constexpr (std::is_same_v<T, PolynomialBasis>) return BasisKind::Polynomial;
                else if constexpr (std::is_same_v<T, GaussianLaplaceBasis>) return BasisKind::GaussianLaplaceMix;
                else if constexpr (std::is_same_v<T, LogisticProbitBasis>) return BasisKind::LogisticProbitMix;
                else return BasisKind::Custom;
            },
            params_);
    }

    int dim() const {
        return std::visit(
            [](const auto& p) -> int {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, GaussianLaplaceBasis>) return static_cast<int>(p.normal_coef.size());
                else if constexpr (std::is_same_v<T, LogisticProbitBasis>) return static_cast<int>(p.logistic_coef.size());
                else return p.d;
            },
            params_);
    }

    void validate_context(const Context& x) const {
        switch (kind()) {
            case BasisKind::Bernoulli:
                require(x.size() == dim(), "bernoulli context must be a d-vector of success probabilities", "x");
                require(x.allFinite() && (x.array() >= 0).all() && (x.array() <= 1).all(),
                        "bernoulli success probability outside [0, 1]", "x");
                break;
            case BasisKind::Polynomial:
                require(x.size() >= 1 && std::isfinite(x(0)) && x(0) > 0, "polynomial context must be > 0", "x");
                break;
            case BasisKind::GaussianLaplaceMix:
            case BasisKind::LogisticProbitMix:
                require(x.size() == dim() && x.allFinite(), "context must have one finite coordinate per basis function", "x");
                break;
            case BasisKind::Custom: break;
        }
    }

    Vector eval(const Context& x, double t) const {
        require(!std::isnan(t), "cutoff t must not be NaN", "t");
        return std::visit(
            [&](const auto& p) -> Vector {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, BernoulliBasis>) {
                    require(x.size() == p.d, "bernoulli context must be a d-vector", "x");
                    return eval_bernoulli_basis(x, t);
                } else if constexpr (std::is_same_v<T, PolynomialBasis>) {
                    require(x.size() >= 1, "polynomial context is empty", "x");
                    return eval_polynomial_basis(p.d, x(0), t);
                } else if constexpr (std::is_same_v<T, GaussianLaplaceBasis>) {
                    return eval_gaussian_laplace_basis(p, x, t);
                } else if constexpr (std::is_same_v<T, LogisticProbitBasis>) {
                    return eval_logistic_probit_basis(p, x, t);
                } else {
                    if (t < p.support_lo) return Vector::Zero(p.d);
                    if (t >= p.support_hi) return Vector::Ones(p.d);
                    Vector v = p.eval(x, t);
                    require(v.size() == p.d, "custom evaluator returned the wrong dimension", "basis");
                    return v;
                }
            },
            params_);
    }

    // Points in t where some coordinate may jump or lose smoothness.
    std::vector<double> breakpoints(const Context& x) const {
        switch (kind()) {
            case BasisKind::Bernoulli:
            case BasisKind::LogisticProbitMix: return {0.0, 1.0};
            case BasisKind::Polynomial: return {0.0, 1.0 / x(0)};
            case BasisKind::GaussianLaplaceMix: {
                const auto& p = std::get<GaussianLaplaceBasis>(params_);
                if (p.w == 0.0) return {};
                std::vector<double> out;
                for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(p.laplace_coef(i) * x(i) + p.laplace_intercept(i));
                return out;
            }
            case BasisKind::Custom: {
                const auto& p = std::get<CustomBasis>(params_);
                std::vector<double> out = p.jumps;
                out.push_back(p.support_lo);
                out.push_back(p.support_hi);
                return out;
            }
        }
        return {};
    }

    // Atom locations when every coordinate is a discrete distribution.
    std::optional<std::vector<double>> atoms() const {
        switch (kind()) {
            case BasisKind::Bernoulli:
            case BasisKind::LogisticProbitMix: return std::vector<double>{0.0, 1.0};
            case BasisKind::Custom: {
                const auto& p = std::get<CustomBasis>(params_);
                if (!p.atoms.empty()) return p.atoms;
                return std::nullopt;
            }
            default: return std::nullopt;
        }
    }

    // Bernoulli success probabilities for the Bernoulli-type families.
    std::optional<Vector> success_probabilities(const Context& x) const {
        if (kind() == BasisKind::Bernoulli) return Vector(x);
        if (kind() == BasisKind::LogisticProbitMix) return logistic_probit_success(std::get<LogisticProbitBasis>(params_), x);
        return std::nullopt;
    }

    // Natural bisection bracket [lo, hi] for the inverse CDF.
    std::pair<double, double> bracket(const Context& x) const {
        switch (kind()) {
            case BasisKind::Bernoulli:
            case BasisKind::LogisticProbitMix: return {0.0, 1.0};
            case BasisKind::Polynomial: return {0.0, 1.0 / x(0)};
            case BasisKind::GaussianLaplaceMix: {
                const auto& p = std::get<GaussianLaplaceBasis>(params_);
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double mn = p.normal_coef(i) * x(i) + p.normal_intercept(i);
                    const double sn = std::sqrt(p.normal_var(i));
                    const double ml = p.laplace_coef(i) * x(i) + p.laplace_intercept(i);
                    const double sl = p.laplace_scale(i);
                    lo = std::min({lo, mn - 40.0 * sn, ml - 40.0 * sl});
                    hi = std::max({hi, mn + 40.0 * sn, ml + 40.0 * sl});
                }
                return {lo, hi};
            }
            case BasisKind::Custom: {
                const auto& p = std::get<CustomBasis>(params_);
                return {p.support_lo, p.support_hi};
            }
        }
        return {0.0, 1.0};
    }

private:
    Params params_;
};

inline std::string to_string(BasisKind k) {
    switch (k) {
        case BasisKind::Bernoulli: return "bernoulli";
        case BasisKind::Polynomial: return "polynomial";
        case BasisKind::GaussianLaplaceMix: return "gaussian_laplace";
        case BasisKind::LogisticProbitMix: return "logistic_probit";
        case BasisKind::Custom: return "custom";
    }
    return "?";
}

// F(x, t) = theta' Phi(x, t), clamped into [0, 1] against simplex round-off.
inline double mixture_cdf_eval(const WeightVector& theta, const BasisFamily& basis, const Context& x, double t) {
    require_simplex(theta);
    require(theta.size() == basis.dim(), "theta dimension does not match the basis", "theta");
    return std::clamp(theta.dot(basis.eval(x, t)), 0.0, 1.0);
}

// Contextual CDF theta' Phi(x, .) bundled as a value.
struct MixtureCdf {
    WeightVector theta;
    const BasisFamily* basis = nullptr;
    Context context;

    double operator()(double t) const { return mixture_cdf_eval(theta, *basis, context, t); }
};

inline constexpr double kInverseCdfTol = 1e-10;

// inf{t : F(x, t) >= u}. Discrete families compare u against the cumulative
// atom masses directly; continuous ones bisect from the family's natural
// bracket, doubling it outward when it does not straddle u.
inline double inverse_cdf_sample(const WeightVector& theta, const BasisFamily& basis, const Context& x, double u) {
    require(u > 0.0 && u < 1.0, "inverse CDF needs u in (0, 1)", "u");
    require_simplex(theta);
    require(theta.size() == basis.dim(), "theta dimension does not match the basis", "theta");
    auto cdf = [&](double t) { return theta.dot(basis.eval(x, t)); };

    if (auto atoms = basis.atoms()) {
        std::vector<double> sorted = *atoms;
        std::sort(sorted.begin(), sorted.end());
        for (double a : sorted)
            if (cdf(a) >= u) return a;
        return sorted.back();
    }

    auto [lo, hi] = basis.bracket(x);
    for (int k = 0; k < 64 && !(cdf(lo) < u); ++k) lo -= std::max(1.0, hi - lo);
    for (int k = 0; k < 64 && !(cdf(hi) >= u); ++k) hi += std::max(1.0, hi - lo);
    if (!(cdf(lo) < u) || !(cdf(hi) >= u))
        throw NumericalError("inverse CDF: no finite bracket found for u = " + std::to_string(u));

    // hi always satisfies F(hi) >= u. Stop once the bracket is within the
    // absolute tolerance and F changes by less than it across the bracket, or
    // when double resolution runs out.
    double flo = cdf(lo), fhi = cdf(hi);
    for (int it = 0; it < 2000; ++it) {
        if (hi - lo <= kInverseCdfTol && fhi - flo <= kInverseCdfTol) break;
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        const double fm = cdf(mid);
        if (fm >= u) hi = mid, fhi = fm;
        else lo = mid, flo = fm;
    }
    return hi;
}

// Spot check that every coordinate is nondecreasing and inside [0, 1] on an
// evenly spaced grid over [lo, hi].
inline bool check_monotone(const BasisFamily& basis, const Context& x, double lo, double hi, int points = 100,
                           double tol = 1e-12) {
    Vector prev = basis.eval(x, lo);
    if ((prev.array() < -tol).any() || (prev.array() > 1 + tol).any()) return false;
    for (int k = 1; k < points; ++k) {
        const double t = lo + (hi - lo) * k / (points - 1);
        Vector cur = basis.eval(x, t);
        if ((cur.array() < -tol).any() || (cur.array() > 1 + tol).any()) return false;
        if (((cur - prev).array() < -tol).any()) return false;
        prev = std::move(cur);
    }
    return true;
}

namespace detail {
inline Vector vec_from_json(const nlohmann::json& j, const std::string& field) {
    require(j.is_array(), field + " must be an array of numbers", field);
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_number(), field + " must be an array of numbers", field);
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}
inline std::vector<double> vec_to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
}  // namespace detail

inline nlohmann::json to_json(const BasisFamily& basis) {
    using detail::vec_to_std;
    nlohmann::json j;
    j["kind"] = to_string(basis.kind());
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliBasis> || std::is_same_v<T, PolynomialBasis>) {
                j["d"] = p.d;
            } else if constexpr (std::is_same_v<T, GaussianLaplaceBasis>) {
                j["w"] = p.w;
                j["normal_coef"] = vec_to_std(p.normal_coef);
                j["normal_intercept"] = vec_to_std(p.normal_intercept);
                j["normal_var"] = vec_to_std(p.normal_var);
                j["laplace_coef"] = vec_to_std(p.laplace_coef);
                j["laplace_intercept"] = vec_to_std(p.laplace_intercept);
                j["laplace_scale"] = vec_to_std(p.laplace_scale);
            } else if constexpr (std::is_same_v<T, LogisticProbitBasis>) {
                j["w"] = p.w;
                j["logistic_coef"] = vec_to_std(p.logistic_coef);
                j["logistic_intercept"] = vec_to_std(p.logistic_intercept);
                j["probit_coef"] = vec_to_std(p.probit_coef);
                j["probit_intercept"] = vec_to_std(p.probit_intercept);
            } else {
                j["d"] = p.d;
                j["name"] = p.name;
            }
        },
        basis.params());
    return j;
}

inline BasisFamily basis_from_json(const nlohmann::json& j) {
    using detail::vec_from_json;
    require(j.is_object() && j.contains("kind") && j["kind"].is_string(), "basis needs a string 'kind'", "basis.kind");
    const std::string kind = j["kind"];
    auto field = [&](const char* key) -> const nlohmann::json& {
        require(j.contains(key), std::string("basis.") + key + " is required", std::string("basis.") + key);
        return j[key];
    };
    if (kind == "bernoulli" || kind == "polynomial") {
        require(field("d").is_number_integer(), "basis.d must be an integer", "basis.d");
        const int d = j["d"];
        return kind == "bernoulli" ? BasisFamily::bernoulli(d) : BasisFamily::polynomial(d);
    }
    if (kind == "gaussian_laplace") {
        GaussianLaplaceBasis p;
        p.w = field("w").get<double>();
        p.normal_coef = vec_from_json(field("normal_coef"), "basis.normal_coef");
        p.normal_intercept = vec_from_json(field("normal_intercept"), "basis.normal_intercept");
        p.normal_var = vec_from_json(field("normal_var"), "basis.normal_var");
        p.laplace_coef = vec_from_json(field("laplace_coef"), "basis.laplace_coef");
        p.laplace_intercept = vec_from_json(field("laplace_intercept"), "basis.laplace_intercept");
        p.laplace_scale = vec_from_json(field("laplace_scale"), "basis.laplace_scale");
        return BasisFamily(std::move(p));
    }
    if (kind == "logistic_probit") {
        LogisticProbitBasis p;
        p.w = field("w").get<double>();
        p.logistic_coef = vec_from_json(field("logistic_coef"), "basis.logistic_coef");
        p.logistic_intercept = vec_from_json(field("logistic_intercept"), "basis.logistic_intercept");
        p.probit_coef = vec_from_json(field("probit_coef"), "basis.probit_coef");
        p.probit_intercept = vec_from_json(field("probit_intercept"), "basis.probit_intercept");
        return BasisFamily(std::move(p));
    }
    throw DomainError("unknown or non-serializable basis kind '" + kind + "'", "basis.kind");
}

}  // namespace cdfreg
