#pragma once

#include "cdfreg/basis.hpp"
#include "cdfreg/gram.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace cdfreg {

struct SolverInfo {
    int iterations = 0;
    double objective = 0.0;
    double residual = 0.0;
    bool converged = true;
};

namespace detail {

// SPD solve with one jittered retry on factorization failure.
inline Vector spd_solve(const Matrix& a, const Vector& b) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt.solve(b);
    const double jitter = 1e-12 * std::max(a.trace(), 1.0) / static_cast<double>(a.rows());
    llt.compute(a + jitter * Matrix::Identity(a.rows(), a.cols()));
    if (llt.info() != Eigen::Success) throw NumericalError("SPD factorization failed after jitter retry", "U");
    return llt.solve(b);
}

}  // namespace detail

// (U + lambda I)^{-1} u
inline WeightVector ridge_estimate(const Matrix& U, const Vector& u, double lambda) {
    require(std::isfinite(lambda) && lambda > 0.0, "ridge estimate needs lambda > 0", "lambda");
    require(U.rows() == U.cols() && U.rows() == u.size(), "gram matrix and response have mismatched sizes", "U");
    return detail::spd_solve(U + lambda * Matrix::Identity(U.rows(), U.cols()), u);
}

inline WeightVector ridge_estimate(const GramState& state, double lambda) { return ridge_estimate(state.U, state.u, lambda); }

inline WeightVector unregularized_estimate(const Matrix& U, const Vector& u) {
    require(U.rows() == U.cols() && U.rows() == u.size(), "gram matrix and response have mismatched sizes", "U");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(U, Eigen::EigenvaluesOnly);
    if (U.rows() == 0 || eig.eigenvalues()(0) <= 1e-10)
        throw SingularGram("U_n is singular (smallest eigenvalue <= 1e-10)", "U");
    return detail::spd_solve(U, u);
}

inline WeightVector unregularized_estimate(const GramState& state) { return unregularized_estimate(state.U, state.u); }

// Euclidean projection onto the probability simplex (sort and threshold).
inline WeightVector project_simplex(const Vector& v) {
    require(v.size() >= 1 && v.allFinite(), "simplex projection needs a finite non-empty vector", "v");
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (s[k] - t > 0.0) tau = t;
    }
    Vector out = (v.array() - tau).max(0.0).matrix();
    const double total = out.sum();
    if (total > 0.0) out /= total;
    else out.setConstant(1.0 / static_cast<double>(v.size()));
    return out;
}

// argmin over the simplex of ||theta - v||_A by projected gradient with step 1/mu_max(A).
inline WeightVector project_simplex_weighted(const Vector& v, const Matrix& A, int max_iter = 100000, double tol = 1e-14,
                                             SolverInfo* info = nullptr) {
    require(A.rows() == A.cols() && A.rows() == v.size(), "weighted projection needs a d x d matrix", "A");
    require(is_symmetric(A), "weighted projection needs a symmetric matrix", "A");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) <= 0.0) throw NumericalError("weighted projection needs a positive definite A", "A");
    const double step = 1.0 / eig.eigenvalues()(A.rows() - 1);

    Vector theta = project_simplex(v);
    int it = 0;
    double move = 0.0;
    for (; it < max_iter; ++it) {
        Vector next = project_simplex(theta - step * (A * (theta - v)));
        move = (next - theta).norm();
        theta = std::move(next);
        if (move < tol) break;
    }
    if (info) *info = {it, 0.5 * (theta - v).dot(A * (theta - v)), move, move < tol};
    return theta;
}

// Default penalty level d sqrt(8 n log(d / delta)).
inline double delta_nU_default(long n, int d, double delta) {
    require(n >= 1, "n must be >= 1", "n");
    require(d >= 1, "d must be >= 1", "d");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)", "delta");
    return d * std::sqrt(8.0 * static_cast<double>(n) * std::log(d / delta));
}

inline double penalized_objective(const Matrix& A, const Vector& b, double penalty, const Vector& theta) {
    return (A * theta - b).norm() + penalty * theta.norm();
}

struct PenalizedResult {
    WeightVector theta;
    SolverInfo info;
};

// argmin_theta ||A theta - b|| + Delta ||theta|| with A = U + lambda I, b = u.
//
// Subgradient descent with a Polyak step toward best-so-far minus a target gap
// (halved whenever 50 iterations pass without improvement), started from the
// ridge estimate. Minimizers lie on the Tikhonov path
// (A'A + mu I)^{-1} A'b, mu in [0, inf], so the result is polished by a
// golden-section search over log mu. The best point seen, the origin
// included, is returned.
inline PenalizedResult penalized_estimate(const Matrix& U, const Vector& u, double lambda, double delta_nU,
                                          int max_iter = 5000, double tol = 1e-10) {
    require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0", "lambda");
    require(std::isfinite(delta_nU) && delta_nU > 0.0, "penalty level must be > 0", "delta_nU");
    require(U.rows() == U.cols() && U.rows() == u.size(), "gram matrix and response have mismatched sizes", "U");
    const Eigen::Index d = U.rows();
    const Matrix A = U + lambda * Matrix::Identity(d, d);
    const Vector& b = u;
    auto f = [&](const Vector& th) { return penalized_objective(A, b, delta_nU, th); };

    const double bnorm = b.norm();
    if (bnorm == 0.0 || (A.transpose() * b).norm() / bnorm <= delta_nU)
        return {Vector::Zero(d), {0, bnorm, 0.0, true}};

    Vector best = Vector::Zero(d);
    double fbest = f(best);
    auto consider = [&](const Vector& th) {
        if (!th.allFinite()) return;
        const double v = f(th);
        if (v < fbest) {
            fbest = v;
            best = th;
        }
    };

    Vector theta = ridge_estimate(U, u, std::max(lambda, 1e-8));
    consider(theta);
    double gap = 1e-3 * f(theta);
    int stall = 0, it = 0;
    for (; it < max_iter; ++it) {
        const Vector r = A * theta - b;
        const double rn = r.norm(), tn = theta.norm();
        Vector g = Vector::Zero(d);
        if (rn > 0.0) g += A.transpose() * r / rn;
        if (tn > 0.0) g += delta_nU * theta / tn;
        const double gg = g.squaredNorm();
        if (gg == 0.0) break;
        const double prev = fbest;
        theta -= std::max(f(theta) - (fbest - gap), 0.0) / gg * g;
        consider(theta);
        if (fbest < prev - tol) stall = 0;
        else if (++stall >= 50) {
            gap *= 0.5;
            stall = 0;
            theta = best;
            if (gap < tol) break;
        }
    }

    const Matrix AtA = A.transpose() * A;
    const Vector Atb = A.transpose() * b;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(AtA);
    const Vector c = eig.eigenvectors().transpose() * Atb;
    auto path = [&](double log_mu) {
        const double mu = std::exp(log_mu);
        const Vector s = (c.array() / (eig.eigenvalues().array().max(0.0) + mu)).matrix();
        return Vector(eig.eigenvectors() * s);
    };
    const double top = std::log(std::max(eig.eigenvalues().maxCoeff(), 1e-300)) + 40.0;
    double lo = top - 120.0, hi = top;
    double best_log = lo, best_path = f(path(lo));
    for (int k = 1; k <= 240; ++k) {
        const double lm = lo + (hi - lo) * k / 240.0;
        const double v = f(path(lm));
        if (v < best_path) best_path = v, best_log = lm;
    }
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = best_log - (hi - lo) / 240.0, z = best_log + (hi - lo) / 240.0;
    for (int k = 0; k < 200 && z - a > 1e-12; ++k) {
        const double x1 = z - gr * (z - a), x2 = a + gr * (z - a);
        if (f(path(x1)) < f(path(x2))) z = x2;
        else a = x1;
    }
    consider(path(best_log));
    consider(path(0.5 * (a + z)));

    const double fridge = f(ridge_estimate(U, u, std::max(lambda, 1e-8)));
    return {best, {it, fbest, fbest - fridge, fbest <= fridge + tol}};
}

inline PenalizedResult penalized_estimate(const GramState& state, double lambda, double delta_nU, int max_iter = 5000,
                                          double tol = 1e-10) {
    return penalized_estimate(state.U, state.u, lambda, delta_nU, max_iter, tol);
}

// Truncated sigma-sequence with an optional rotation whose columns are the
// eigenfunctions e_i expressed in the working coordinates.
struct SigmaSequence {
    Vector sigmas;
    std::optional<Matrix> rotation;

    int truncation() const { return static_cast<int>(sigmas.size()); }
};

inline Matrix eigen_rotation(const Matrix& U) {
    require(is_symmetric(U), "eigen rotation needs a symmetric matrix", "U");
    return Eigen::SelfAdjointEigenSolver<Matrix>(U).eigenvectors();
}

// theta_sigma = sum_i sigma_i^2 <e_i, u> / (1 + lambda_i sigma_i^2) e_i, where
// lambda_i = <e_i, U e_i>. The rotation must diagonalize U; without one the
// equivalent system (U + diag(1 / sigma_i^2)) theta = u is solved.
inline Vector hilbert_estimate(const Matrix& U, const Vector& u, const SigmaSequence& sigma) {
    const Eigen::Index m = U.rows();
    require(U.cols() == m && u.size() == m && sigma.sigmas.size() == m, "hilbert estimate inputs have mismatched sizes",
            "sigmas");
    require((sigma.sigmas.array() != 0.0).all() && sigma.sigmas.allFinite(), "every sigma_i must be finite and nonzero",
            "sigmas");
    require(is_symmetric(U), "U must be symmetric", "U");
    const Vector s2 = sigma.sigmas.array().square().matrix();
    if (!sigma.rotation) {
        Matrix a = U;
        a.diagonal() += s2.cwiseInverse();
        return detail::spd_solve(a, u);
    }
    const Matrix& E = *sigma.rotation;
    require(E.rows() == m && E.cols() == m, "rotation must be m x m", "rotation");
    const Matrix D = E.transpose() * U * E;
    const Matrix off = D - Matrix(D.diagonal().asDiagonal());
    require(off.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, D.cwiseAbs().maxCoeff()),
            "rotation does not diagonalize U", "rotation");
    const Vector coef = (E.transpose() * u).array() * s2.array() / (1.0 + D.diagonal().array() * s2.array());
    return E * coef;
}

// Right-continuous empirical CDF.
class Ecdf {
public:
    explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
        require(!sorted_.empty(), "ECDF needs at least one sample", "samples");
        for (double y : sorted_) require(std::isfinite(y), "ECDF samples must be finite", "samples");
        std::sort(sorted_.begin(), sorted_.end());
    }

    double operator()(double t) const {
        const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
        return static_cast<double>(k) / static_cast<double>(sorted_.size());
    }

    const std::vector<double>& sorted() const { return sorted_; }

    // Distinct sample values: the jump points.
    std::vector<double> jumps() const {
        std::vector<double> out = sorted_;
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    std::vector<double> sorted_;
};

inline Ecdf ecdf(std::vector<double> samples) { return Ecdf(std::move(samples)); }

struct Sample {
    Context x;
    double y = 0.0;
};

// Per-sample likelihood vector rho_j: the basis PMFs at y_j.
inline Vector pmf_vector(const BasisFamily& basis, const Context& x, double y) {
    auto atoms = basis.atoms();
    require(atoms.has_value(), "MLE baseline supports discrete-outcome bases only", "basis");
    std::vector<double> sorted = *atoms;
    std::sort(sorted.begin(), sorted.end());
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), y);
    if (it == sorted.end() || *it != y) return Vector::Zero(basis.dim());
    const Vector at = basis.eval(x, y);
    if (it == sorted.begin()) return at;
    return at - basis.eval(x, *std::prev(it));
}

// argmax over the simplex of (1/n) sum_j log(theta' rho_j) by projected
// gradient ascent with Armijo backtracking.
inline WeightVector fit_mle_simplex(const std::vector<Sample>& samples, const BasisFamily& basis, int max_iter = 20000,
                                    double tol = 1e-9, SolverInfo* info = nullptr) {
    require(!samples.empty(), "MLE needs at least one sample", "samples");
    const int d = basis.dim();
    Matrix rho(static_cast<Eigen::Index>(samples.size()), d);
    for (std::size_t j = 0; j < samples.size(); ++j) {
        rho.row(static_cast<Eigen::Index>(j)) = pmf_vector(basis, samples[j].x, samples[j].y).transpose().cwiseMax(0.0);
        if (rho.row(static_cast<Eigen::Index>(j)).maxCoeff() <= 0.0)
            throw NumericalError("degenerate likelihood: a sample has zero probability under every basis", "samples");
    }
    const double n = static_cast<double>(samples.size());
    auto loglik = [&](const Vector& th) {
        const Vector p = rho * th;
        if ((p.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
        return p.array().log().sum() / n;
    };
    auto grad = [&](const Vector& th) { return Vector(rho.transpose() * (rho * th).cwiseInverse() / n); };

    Vector theta = Vector::Constant(d, 1.0 / d);
    double L = loglik(theta), step = 1.0, kkt = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Vector g = grad(theta);
        kkt = (theta - project_simplex(theta + g)).norm();
        if (kkt <= tol) break;
        step = std::min(step * 2.0, 1e6);
        for (int bt = 0; bt < 60; ++bt) {
            const Vector cand = project_simplex(theta + step * g);
            const double Lc = loglik(cand);
            if (Lc >= L + 1e-4 * g.dot(cand - theta)) {
                theta = cand;
                L = Lc;
                break;
            }
            step *= 0.5;
        }
    }
    if (info) *info = {it, L, kkt, kkt <= tol};
    return theta;
}

}  // namespace cdfreg
