#pragma once

// Tabular pipeline: CSV ingestion, standardization, three-way split,
// univariate basis-parameter fits and L2/CRPS evaluation against baselines.

#include "cdfreg/bounds.hpp"
#include "cdfreg/estimators.hpp"
#include "cdfreg/gram.hpp"
#include "cdfreg/rng.hpp"
#include "cdfreg/synth.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cdfreg {

struct TabularDataset {
    std::vector<std::string> feature_names;
    std::string outcome_name;
    Matrix X;  // n x p
    Vector y;
    long dropped_rows = 0;
    std::vector<std::string> excluded_columns;  // categorical columns left out
};

struct CsvOptions {
    char delimiter = ',';
    std::string outcome;
    std::vector<std::string> features;  // empty: every other column
    bool ordinal_encode = false;        // encode non-numeric feature columns by sorted level
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
            else if (c == '"') quoted = false;
            else cur += c;
        } else if (c == '"') quoted = true;
        else if (c == delim) out.push_back(std::move(cur)), cur.clear();
        else if (c != '\r') cur += c;
    }
    out.push_back(std::move(cur));
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

inline bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "?" || s == "nan" || s == "NaN"; }

inline std::optional<double> parse_number(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

// Rows with a missing value in any used column are dropped and counted.
// Non-numeric feature columns are excluded unless ordinal_encode is set.
inline TabularDataset read_csv(std::istream& in, const CsvOptions& opt) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "CSV input is empty", "csv");
    const auto header = detail::split_csv_line(line, opt.delimiter);
    const auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DomainError("column '" + name + "' not found in CSV header", "outcome");
        return static_cast<std::size_t>(it - header.begin());
    };
    require(!opt.outcome.empty(), "outcome column must be named", "outcome");
    const std::size_t ycol = col(opt.outcome);
    std::vector<std::size_t> fcols;
    if (opt.features.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != ycol) fcols.push_back(c);
    } else {
        for (const auto& f : opt.features) {
            const auto it = std::find(header.begin(), header.end(), f);
            if (it == header.end()) throw DomainError("feature column '" + f + "' not found in CSV header", "features");
            fcols.push_back(static_cast<std::size_t>(it - header.begin()));
        }
    }

    std::vector<std::vector<std::string>> rows;
    long dropped = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = detail::split_csv_line(line, opt.delimiter);
        bool ok = fields.size() == header.size() && !detail::is_missing(fields[ycol]);
        for (std::size_t c : fcols) ok = ok && !detail::is_missing(fields[c]);
        if (!ok) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(fields));
    }

    TabularDataset out;
    out.outcome_name = opt.outcome;
    out.dropped_rows = dropped;
    std::vector<std::size_t> used;
    std::vector<std::map<std::string, double>> levels;
    for (std::size_t c : fcols) {
        bool numeric = true;
        for (const auto& r : rows) numeric = numeric && detail::parse_number(r[c]).has_value();
        if (numeric || opt.ordinal_encode) {
            used.push_back(c);
            out.feature_names.push_back(header[c]);
            std::map<std::string, double> lv;
            if (!numeric) {
                std::set<std::string> distinct;
                for (const auto& r : rows) distinct.insert(r[c]);
                double k = 0.0;
                for (const auto& s : distinct) lv[s] = k++;
            }
            levels.push_back(std::move(lv));
        } else {
            out.excluded_columns.push_back(header[c]);
        }
    }
    out.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(used.size()));
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto yv = detail::parse_number(rows[r][ycol]);
        if (!yv) throw DomainError("outcome value '" + rows[r][ycol] + "' is not numeric", "outcome");
        out.y(static_cast<Eigen::Index>(r)) = *yv;
        for (std::size_t k = 0; k < used.size(); ++k) {
            const auto& s = rows[r][used[k]];
            out.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                levels[k].empty() ? *detail::parse_number(s) : levels[k].at(s);
        }
    }
    return out;
}

inline TabularDataset read_csv_file(const std::string& path, const CsvOptions& opt) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open CSV file '" + path + "'", "csv");
    return read_csv(in, opt);
}

struct Standardization {
    Vector mean, sd;
};

// Columns to mean 0 and variance 1 (denominator n). Constant columns are only
// centered.
inline Standardization standardize_columns(Matrix& X) {
    Standardization s{Vector::Zero(X.cols()), Vector::Ones(X.cols())};
    const double n = static_cast<double>(X.rows());
    if (X.rows() == 0) return s;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        s.mean(c) = X.col(c).mean();
        X.col(c).array() -= s.mean(c);
        const double var = X.col(c).squaredNorm() / n;
        if (var > 0.0) {
            s.sd(c) = std::sqrt(var);
            X.col(c) /= s.sd(c);
        }
    }
    return s;
}

inline void standardize(TabularDataset& data, bool outcome_too) {
    standardize_columns(data.X);
    if (outcome_too) {
        Matrix y = data.y;
        standardize_columns(y);
        data.y = y.col(0);
    }
}

inline TabularDataset take_rows(const TabularDataset& d, const std::vector<std::size_t>& idx) {
    TabularDataset out = d;
    out.X.resize(static_cast<Eigen::Index>(idx.size()), d.X.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.X.row(static_cast<Eigen::Index>(k)) = d.X.row(static_cast<Eigen::Index>(idx[k]));
        out.y(static_cast<Eigen::Index>(k)) = d.y(static_cast<Eigen::Index>(idx[k]));
    }
    return out;
}

// Seeded Fisher-Yates permutation cut into floor(n/3), floor(n/2) and the rest.
inline std::array<std::vector<std::size_t>, 3> three_way_split_indices(std::size_t n, std::uint64_t seed) {
    require(n >= 6, "three-way split needs at least 6 rows", "rows");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, {0x5370'6c69ULL});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    const std::size_t a = n / 3, b = n / 2;
    return {std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<long>(a)),
            std::vector<std::size_t>(perm.begin() + static_cast<long>(a), perm.begin() + static_cast<long>(a + b)),
            std::vector<std::size_t>(perm.begin() + static_cast<long>(a + b), perm.end())};
}

inline std::array<TabularDataset, 3> three_way_split(const TabularDataset& data, std::uint64_t seed) {
    const auto idx = three_way_split_indices(static_cast<std::size_t>(data.y.size()), seed);
    return {take_rows(data, idx[0]), take_rows(data, idx[1]), take_rows(data, idx[2])};
}

// ---------------------------------------------------------------- univariate fits

enum class FitModel { OLS, LAD, Logistic, Probit };

struct UnivariateFit {
    FitModel model = FitModel::OLS;
    double coef = 0.0;
    double intercept = 0.0;
    double scale = 0.0;  // residual variance (OLS) or mean absolute residual (LAD)
    bool converged = true;
    bool separated = false;
    int iterations = 0;
};

namespace detail {
inline void require_xy(const Vector& xs, const Vector& ys) {
    require(xs.size() == ys.size(), "xs and ys differ in length", "xs");
    require(xs.size() >= 2 && (xs.array() != xs(0)).any(), "univariate fit needs at least 2 distinct xs", "xs");
}
inline double lad_objective(const Vector& xs, const Vector& ys, double a, double b) {
    return (ys.array() - a * xs.array() - b).abs().sum();
}
// Minimizer of sum_k w_k |v_k - c| over c.
inline double weighted_median(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& p : vw) total += p.second;
    double acc = 0.0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= 0.5 * total) return p.first;
    }
    return vw.back().first;
}
}  // namespace detail

inline UnivariateFit fit_ols_univariate(const Vector& xs, const Vector& ys) {
    detail::require_xy(xs, ys);
    const double mx = xs.mean(), my = ys.mean();
    const Vector dx = xs.array() - mx;
    const double coef = dx.dot(ys.array().matrix() - Vector::Constant(ys.size(), my)) / dx.squaredNorm();
    const double intercept = my - coef * mx;
    const Vector r = ys.array() - coef * xs.array() - intercept;
    return {FitModel::OLS, coef, intercept, r.squaredNorm() / static_cast<double>(xs.size())};
}

// Least absolute deviations: IRLS with residual floor 1e-8, then alternating
// weighted-median coordinate descent from the IRLS result; the best objective
// seen wins.
inline UnivariateFit fit_lad_univariate(const Vector& xs, const Vector& ys, int max_iter = 200, double tol = 1e-10) {
    detail::require_xy(xs, ys);
    const auto n = xs.size();
    const UnivariateFit ols = fit_ols_univariate(xs, ys);
    double a = ols.coef, b = ols.intercept, best_a = a, best_b = b;
    double best = detail::lad_objective(xs, ys, a, b);
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        const Vector w = (ys.array() - a * xs.array() - b).abs().max(1e-8).inverse();
        const double sw = w.sum(), mx = w.dot(xs) / sw, my = w.dot(ys) / sw;
        const Vector dx = xs.array() - mx;
        const double sxx = (w.array() * dx.array().square()).sum();
        if (!(sxx > 0.0)) break;
        const double na = (w.array() * dx.array() * (ys.array() - my)).sum() / sxx;
        const double nb = my - na * mx;
        const double obj = detail::lad_objective(xs, ys, na, nb);
        const bool small = std::abs(na - a) + std::abs(nb - b) < tol;
        a = na, b = nb;
        if (obj < best) best = obj, best_a = a, best_b = b;
        if (small) {
            converged = true;
            break;
        }
    }
    a = best_a, b = best_b;
    for (int k = 0; k < max_iter; ++k) {
        std::vector<std::pair<double, double>> vb, va;
        for (Eigen::Index j = 0; j < n; ++j) vb.emplace_back(ys(j) - a * xs(j), 1.0);
        const double nb = detail::weighted_median(std::move(vb));
        for (Eigen::Index j = 0; j < n; ++j)
            if (xs(j) != 0.0) va.emplace_back((ys(j) - nb) / xs(j), std::abs(xs(j)));
        const double na = detail::weighted_median(std::move(va));
        const double obj = detail::lad_objective(xs, ys, na, nb);
        const bool moved = std::abs(na - a) + std::abs(nb - b) > tol;
        a = na, b = nb;
        if (obj < best - tol * (1.0 + best)) best = obj, best_a = a, best_b = b, converged = true;
        else if (obj <= best) best = obj, best_a = a, best_b = b;
        if (!moved) break;
    }
    return {FitModel::LAD, best_a, best_b, best / static_cast<double>(n), converged, false, it};
}

namespace detail {
// Success probability and its derivative in the linear predictor.
inline std::pair<double, double> link_eval(FitModel link, double eta) {
    if (link == FitModel::Logistic) {
        const double p = logistic(eta);
        return {p, p * (1.0 - p)};
    }
    return {normal_cdf(eta), std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * std::numbers::pi)};
}
// log p and log(1 - p) without cancellation.
inline std::pair<double, double> link_logs(FitModel link, double eta) {
    if (link == FitModel::Logistic) {
        const double lp = -std::log1p(std::exp(-std::abs(eta))) - std::max(-eta, 0.0);
        const double lq = -std::log1p(std::exp(-std::abs(eta))) - std::max(eta, 0.0);
        return {lp, lq};
    }
    return {std::log(normal_cdf(eta)), std::log(normal_cdf(-eta))};
}
}  // namespace detail

inline double glm_loglik(const Vector& xs, const Vector& ys, FitModel link, double coef, double intercept) {
    double ll = 0.0;
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        const auto [lp, lq] = detail::link_logs(link, coef * xs(j) + intercept);
        ll += ys(j) > 0.5 ? lp : lq;
    }
    return ll;
}

// Gradient of the log-likelihood in (coef, intercept).
inline Eigen::Vector2d glm_gradient(const Vector& xs, const Vector& ys, FitModel link, double coef, double intercept) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        const double eta = coef * xs(j) + intercept;
        double s;  // d loglik / d eta
        if (link == FitModel::Logistic) s = ys(j) - logistic(eta);
        else {
            // phi/Phi ratios via erfc keep full accuracy in the tails.
            const double phi = std::exp(-0.5 * eta * eta) / std::sqrt(2.0 * std::numbers::pi);
            s = ys(j) > 0.5 ? phi / normal_cdf(eta) : -phi / normal_cdf(-eta);
        }
        g(0) += s * xs(j);
        g(1) += s;
    }
    return g;
}

// Newton-Raphson (logistic) or Fisher scoring (probit) with step halving.
// Coefficients are capped at |beta| <= 30; hitting the cap sets `separated`.
inline UnivariateFit fit_glm_univariate(const Vector& xs, const Vector& ys, FitModel link, int max_iter = 200,
                                        double tol = 1e-8) {
    require(link == FitModel::Logistic || link == FitModel::Probit, "GLM link must be logistic or probit", "link");
    require(xs.size() == ys.size() && xs.size() >= 2, "GLM needs matching xs and ys", "xs");
    bool has0 = false, has1 = false;
    for (Eigen::Index j = 0; j < ys.size(); ++j) {
        require(ys(j) == 0.0 || ys(j) == 1.0, "GLM outcomes must be 0 or 1", "ys");
        has0 = has0 || ys(j) == 0.0;
        has1 = has1 || ys(j) == 1.0;
    }
    require(has0 && has1, "GLM needs both outcome classes", "ys");
    constexpr double cap = 30.0;

    Eigen::Vector2d beta(0.0, 0.0);
    double ll = glm_loglik(xs, ys, link, beta(0), beta(1));
    UnivariateFit fit{link};
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::Vector2d g = glm_gradient(xs, ys, link, beta(0), beta(1));
        if (g.norm() <= tol) break;
        Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
        for (Eigen::Index j = 0; j < xs.size(); ++j) {
            const double eta = beta(0) * xs(j) + beta(1);
            const auto [p, dp] = detail::link_eval(link, eta);
            const double w = dp * dp / std::max(p * (1.0 - p), 1e-300);
            const Eigen::Vector2d z(xs(j), 1.0);
            info += w * z * z.transpose();
        }
        Eigen::Vector2d step = info.ldlt().solve(g);
        if (!step.allFinite()) step = g;
        double scale = 1.0;
        bool moved = false;
        for (int h = 0; h < 60; ++h, scale *= 0.5) {
            Eigen::Vector2d cand = beta + scale * step;
            const bool capped = cand.cwiseAbs().maxCoeff() > cap;
            cand = cand.cwiseMax(-cap).cwiseMin(cap);
            const double lc = glm_loglik(xs, ys, link, cand(0), cand(1));
            if (lc >= ll) {
                moved = (cand - beta).norm() > 0.0;
                beta = cand;
                ll = lc;
                fit.separated = fit.separated || capped;
                break;
            }
        }
        if (!moved || (fit.separated && beta.cwiseAbs().maxCoeff() >= cap)) break;
    }
    fit.coef = beta(0);
    fit.intercept = beta(1);
    fit.iterations = it;
    fit.converged = glm_gradient(xs, ys, link, beta(0), beta(1)).norm() <= tol;
    // The MLE diverges when a threshold on x splits the classes; Newton can stop
    // on the gradient tolerance well before the cap in that case.
    double lo0 = INFINITY, hi0 = -INFINITY, lo1 = INFINITY, hi1 = -INFINITY;
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        if (ys(j) == 0.0) lo0 = std::min(lo0, xs(j)), hi0 = std::max(hi0, xs(j));
        else lo1 = std::min(lo1, xs(j)), hi1 = std::max(hi1, xs(j));
    }
    fit.separated = fit.separated || beta.cwiseAbs().maxCoeff() >= cap || hi0 <= lo1 || hi1 <= lo0;
    return fit;
}

// ---------------------------------------------------------------- pipeline

struct PipelineConfig {
    std::string csv;
    CsvOptions csv_options;
    BasisKind basis = BasisKind::GaussianLaplaceMix;  // or LogisticProbitMix
    double w = 0.0;
    std::vector<double> lambdas{0.1, 1.0, 5.0};
    std::optional<QuadMeasure> measure;  // default N(0, 100) for continuous, U[0, 1] for binary outcomes
    int seeds = 20;
    std::uint64_t seed = 0;
    std::vector<std::string> methods{"ridge", "ecdf", "mle"};
    bool project = true;
    bool standardize_outcome = true;  // continuous outcomes only
    int threads = 1;
};

struct PipelineRow {
    std::string method;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    int seed = 0;
    double l2_error = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct PipelineReport {
    std::vector<PipelineRow> rows;
    long n_rows = 0;
    long dropped_rows = 0;
    std::vector<std::string> features;
    std::vector<std::string> excluded_columns;
    bool binary_outcome = false;
};

// Basis parameters from univariate fits of y on each feature.
inline BasisFamily fit_basis(const TabularDataset& fit, BasisKind kind, double w) {
    const auto p = fit.X.cols();
    require(p >= 1, "dataset has no usable feature columns", "features");
    if (kind == BasisKind::GaussianLaplaceMix) {
        GaussianLaplaceBasis b;
        b.w = w;
        b.normal_coef.resize(p), b.normal_intercept.resize(p), b.normal_var.resize(p);
        b.laplace_coef.resize(p), b.laplace_intercept.resize(p), b.laplace_scale.resize(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            const Vector xi = fit.X.col(i);
            const auto ols = fit_ols_univariate(xi, fit.y);
            const auto lad = fit_lad_univariate(xi, fit.y);
            b.normal_coef(i) = ols.coef, b.normal_intercept(i) = ols.intercept;
            b.normal_var(i) = std::max(ols.scale, 1e-12);
            b.laplace_coef(i) = lad.coef, b.laplace_intercept(i) = lad.intercept;
            b.laplace_scale(i) = std::max(lad.scale, 1e-12);
        }
        return BasisFamily(b);
    }
    require(kind == BasisKind::LogisticProbitMix, "pipeline basis must be gaussian_laplace or logistic_probit", "basis");
    LogisticProbitBasis b;
    b.w = w;
    b.logistic_coef.resize(p), b.logistic_intercept.resize(p), b.probit_coef.resize(p), b.probit_intercept.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const Vector xi = fit.X.col(i);
        const auto lg = fit_glm_univariate(xi, fit.y, FitModel::Logistic);
        const auto pr = fit_glm_univariate(xi, fit.y, FitModel::Probit);
        b.logistic_coef(i) = lg.coef, b.logistic_intercept(i) = lg.intercept;
        b.probit_coef(i) = pr.coef, b.probit_intercept(i) = pr.intercept;
    }
    return BasisFamily(b);
}

inline std::vector<Sample> to_samples(const TabularDataset& d) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(d.y.size()));
    for (Eigen::Index j = 0; j < d.y.size(); ++j) out.push_back({d.X.row(j).transpose(), d.y(j)});
    return out;
}

// Rows per seed: one per lambda for "ridge", then "ecdf", then "mle".
inline std::vector<PipelineRow> evaluate_seed(const TabularDataset& data, const PipelineConfig& cfg, const QuadMeasure& m,
                                              bool binary, int seed_index) {
    std::vector<PipelineRow> rows;
    const auto wants = [&](const char* s) { return std::find(cfg.methods.begin(), cfg.methods.end(), s) != cfg.methods.end(); };
    const auto fail_all = [&](const std::string& why) {
        std::vector<PipelineRow> out;
        if (wants("ridge"))
            for (double l : cfg.lambdas) out.push_back({"ridge", l, seed_index, std::numeric_limits<double>::quiet_NaN(), why});
        if (wants("ecdf")) out.push_back({"ecdf", std::numeric_limits<double>::quiet_NaN(), seed_index,
                                          std::numeric_limits<double>::quiet_NaN(), why});
        if (wants("mle")) out.push_back({"mle", std::numeric_limits<double>::quiet_NaN(), seed_index,
                                         std::numeric_limits<double>::quiet_NaN(), why});
        return out;
    };

    std::array<TabularDataset, 3> parts;
    std::optional<BasisFamily> basis;
    try {
        const std::uint64_t split_seed = Rng(cfg.seed, {static_cast<std::uint64_t>(seed_index)}).key();
        parts = three_way_split(data, split_seed);
        basis = fit_basis(parts[0], cfg.basis, cfg.w);
    } catch (const std::exception& e) {
        return fail_all(std::string("error: ") + e.what());
    }
    const auto train = to_samples(parts[1]);
    const auto test = to_samples(parts[2]);
    const BasisFamily& b = *basis;
    const JumpFn jumps = [&](const Context& x) { return b.breakpoints(x); };

    if (wants("ridge")) {
        std::optional<GramState> state;
        std::string why;
        try {
            state = GramState::empty(b.dim());
            for (const auto& s : train) state->add(b, s.x, s.y, m);
        } catch (const std::exception& e) {
            why = std::string("error: ") + e.what();
        }
        for (double lambda : cfg.lambdas) {
            PipelineRow row{"ridge", lambda, seed_index};
            try {
                if (!state) throw NumericalError(why);
                WeightVector th = ridge_estimate(*state, lambda);
                if (cfg.project) th = project_simplex(th);
                const ContextualCdf F = [&](const Context& x, double t) {
                    return cfg.project ? mixture_cdf_eval(th, b, x, t) : th.dot(b.eval(x, t));
                };
                row.l2_error = l2_error_crps(test, F, m, jumps);
            } catch (const std::exception& e) {
                row.status = std::string("error: ") + e.what();
            }
            rows.push_back(row);
        }
    }
    if (wants("ecdf")) {
        PipelineRow row{"ecdf", std::numeric_limits<double>::quiet_NaN(), seed_index};
        try {
            std::vector<double> ys;
            for (const auto& s : train) ys.push_back(s.y);
            row.l2_error = l2_error_step(test, Ecdf(std::move(ys)), m);
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
        rows.push_back(row);
    }
    if (wants("mle")) {
        PipelineRow row{"mle", std::numeric_limits<double>::quiet_NaN(), seed_index};
        if (!binary) {
            row.status = "unsupported";
        } else {
            try {
                const WeightVector th = fit_mle_simplex(train, b);
                row.l2_error = l2_error_crps(
                    test, [&](const Context& x, double t) { return mixture_cdf_eval(th, b, x, t); }, m, jumps);
            } catch (const std::exception& e) {
                row.status = std::string("error: ") + e.what();
            }
        }
        rows.push_back(row);
    }
    return rows;
}

inline bool is_binary(const Vector& y) {
    return y.size() > 0 && (y.array() == 0.0 || y.array() == 1.0).all();
}

inline PipelineReport evaluate_pipeline(TabularDataset data, const PipelineConfig& cfg);

inline PipelineReport evaluate_pipeline(const PipelineConfig& cfg) {
    return evaluate_pipeline(read_csv_file(cfg.csv, cfg.csv_options), cfg);
}

inline PipelineReport evaluate_pipeline(TabularDataset data, const PipelineConfig& cfg) {
    require(cfg.seeds >= 1, "seeds must be >= 1", "seeds");
    require(!cfg.lambdas.empty(), "lambdas must be non-empty", "lambdas");
    for (double l : cfg.lambdas) require(l > 0.0 && std::isfinite(l), "every lambda must be > 0", "lambdas");
    require(cfg.w >= 0.0 && cfg.w <= 1.0, "w must lie in [0, 1]", "w");
    for (const auto& mth : cfg.methods)
        require(mth == "ridge" || mth == "ecdf" || mth == "mle", "unknown method '" + mth + "'", "methods");
    require(static_cast<std::size_t>(data.y.size()) >= 6, "dataset needs at least 6 rows after filtering", "csv");

    PipelineReport report;
    report.binary_outcome = is_binary(data.y);
    report.n_rows = data.y.size();
    report.dropped_rows = data.dropped_rows;
    report.features = data.feature_names;
    report.excluded_columns = data.excluded_columns;
    standardize(data, cfg.standardize_outcome && !report.binary_outcome);
    const QuadMeasure m = cfg.measure ? *cfg.measure
                          : report.binary_outcome ? make_uniform_measure(0.0, 1.0)
                                                  : make_gaussian_measure(0.0, 100.0);

    std::vector<std::vector<PipelineRow>> slots(static_cast<std::size_t>(cfg.seeds));
    detail::parallel_for(slots.size(), cfg.threads, [&](std::size_t s) {
        slots[s] = evaluate_seed(data, cfg, m, report.binary_outcome, static_cast<int>(s));
    });
    for (auto& s : slots)
        for (auto& r : s) report.rows.push_back(std::move(r));
    return report;
}

// Per method (and lambda) quantiles of the finite errors, for box plots.
inline nlohmann::json pipeline_summary(const PipelineReport& r) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> vals;
    std::map<std::string, int> failures;
    for (const auto& row : r.rows) {
        std::string key = row.method;
        if (std::isfinite(row.lambda)) {
            std::ostringstream os;
            os << row.method << ":" << row.lambda;
            key = os.str();
        }
        if (!vals.count(key)) order.push_back(key), vals[key], failures[key] = 0;
        if (row.status == "ok" && std::isfinite(row.l2_error)) vals[key].push_back(row.l2_error);
        else ++failures[key];
    }
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& k : order) {
        const auto& v = vals[k];
        nlohmann::json j{{"method", k}, {"count", v.size()}, {"failures", failures[k]}};
        if (!v.empty()) {
            double s = 0.0;
            for (double x : v) s += x;
            j["mean"] = s / static_cast<double>(v.size());
            j["min"] = quantile(v, 0.0);
            j["q25"] = quantile(v, 0.25);
            j["median"] = quantile(v, 0.5);
            j["q75"] = quantile(v, 0.75);
            j["max"] = quantile(v, 1.0);
        }
        methods.push_back(j);
    }
    return {{"n_rows", r.n_rows},
            {"dropped_rows", r.dropped_rows},
            {"features", r.features},
            {"excluded_columns", r.excluded_columns},
            {"binary_outcome", r.binary_outcome},
            {"methods", methods}};
}

}  // namespace cdfreg
