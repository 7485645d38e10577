#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace cdfreg;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

WeightVector random_simplex(Rng& rng, int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = -std::log(rng.uniform_open());
    return v / v.sum();
}

}  // namespace

TEST(EpsilonLambda, Arithmetic) {
    EXPECT_NEAR(epsilon_lambda(1, 1, std::exp(-0.5), 1, 1), std::sqrt(std::log(2.0) + 1.0) + 1.0, 1e-14);
    EXPECT_NEAR(epsilon_lambda(1, 1, std::exp(-0.5), 1, 1), 2.301210, 1e-6);
    EXPECT_LT(epsilon_lambda(1e-9, 1, 0.999999, 1, 0), 2e-3);
    EXPECT_LT(epsilon_lambda(10, 3, 0.1, 0.5, 1), epsilon_lambda(100, 3, 0.1, 0.5, 1));
    EXPECT_LT(epsilon_lambda(10, 3, 0.1, 0.5, 1), epsilon_lambda(10, 3, 0.01, 0.5, 1));
    EXPECT_THROW(epsilon_lambda(10, 3, 1.5, 0.5, 1), DomainError);
    EXPECT_THROW(epsilon_lambda(10, 3, 0.1, 0.0, 1), DomainError);
}

TEST(EpsilonUnreg, Arithmetic) {
    const double inv_e = std::exp(-1.0);
    EXPECT_NEAR(epsilon_unreg(1, 1, inv_e, 1), 1.0 + std::sqrt(8.0) + 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(epsilon_unreg(1, 1, inv_e, 1), 5.16176, 1e-5);
    EXPECT_NEAR(epsilon_unreg(7, 2, 0.1, 4), epsilon_unreg(7, 2, 0.1, 1) / 2.0, 1e-14);
    EXPECT_LT(epsilon_unreg(7, 2, 0.1, 1), epsilon_unreg(7, 3, 0.1, 1));
}

TEST(PenalizedBound, Arithmetic) {
    const double inv_e = std::exp(-1.0);
    const double v = penalized_bound(1, 1, inv_e, 1, 1);
    EXPECT_NEAR(v, 2.0 * std::sqrt(8.0) + 2.0 * (1.0 + std::sqrt(8.0) + 4.0 / 3.0), 1e-13);
    EXPECT_NEAR(v, 15.9803, 1e-4);
    EXPECT_NEAR(penalized_bound(9, 2, 0.1, 0.5, 0.3), 2.0 * penalized_bound(9, 2, 0.1, 1.0, 0.3), 1e-12);
    EXPECT_NEAR(penalized_bound(1, 1, inv_e, 1, 0), 2.0 * (1.0 + std::sqrt(8.0) + 4.0 / 3.0), 1e-13);
}

TEST(HilbertBound, ArithmeticAndReduction) {
    EXPECT_NEAR(hilbert_bound({1.0}, {1.0}, std::exp(-0.5), 1.0), epsilon_lambda(1, 1, std::exp(-0.5), 1, 1), 1e-14);
    EXPECT_NEAR(hilbert_bound({0.0, 0.0}, {2.0, 3.0}, 0.1, 0.4), std::sqrt(2.0 * std::log(10.0)) + 0.4, 1e-14);
    EXPECT_THROW(hilbert_bound({1.0}, {0.0}, 0.1, 0.0), DomainError);

    // Eigenvalues capped at n with sigma_i = 1 / sqrt(lambda) reproduce eps_lambda.
    const int d = 4;
    const double n = 250, lambda = 0.3, delta = 0.05;
    const std::vector<double> eig(d, n), sig(d, 1.0 / std::sqrt(lambda));
    EXPECT_NEAR(hilbert_bound(eig, sig, delta, 0.0), epsilon_lambda(n, d, delta, lambda, 0.0), 1e-12);
}

TEST(MismatchBound, Arithmetic) {
    EXPECT_DOUBLE_EQ(mismatch_bound(2.0, 0.0, 0.7), 2.0);
    EXPECT_DOUBLE_EQ(mismatch_bound(2.0, 1.0, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(mismatch_bound(2.0, 1.0, 4.0), 2.5);
    EXPECT_NEAR(mismatch_bound(2.0, 1.0, 2.0, true), std::sqrt(2.0) * 2.0 + 1.0, 1e-15);
}

TEST(BoundProperties, Positive) {
    Rng rng(6);
    for (int k = 0; k < 200; ++k) {
        const double n = rng.uniform(1, 1e5), delta = rng.uniform(0.001, 0.999), lambda = rng.uniform(1e-4, 10);
        const int d = 1 + static_cast<int>(rng.below(10));
        EXPECT_GT(epsilon_lambda(n, d, delta, lambda, 0.0), 0.0);
        EXPECT_GT(epsilon_unreg(n, d, delta, rng.uniform(0.01, 10)), 0.0);
        EXPECT_GT(penalized_bound(n, d, delta, rng.uniform(0.01, 10), 0.0), 0.0);
        EXPECT_GT(hilbert_bound({0.0}, {1.0}, delta, 0.0), 0.0);
    }
}

TEST(WeightedNorm, Cases) {
    EXPECT_DOUBLE_EQ(weighted_norm(vec({1.0, 0.0}), Matrix::Identity(2, 2)), 1.0);
    EXPECT_DOUBLE_EQ(weighted_norm(vec({1.0, 1.0}), Matrix(vec({2.0, 2.0}).asDiagonal())), 2.0);
    EXPECT_DOUBLE_EQ(weighted_norm(Vector::Zero(2), Matrix::Identity(2, 2)), 0.0);
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        const Vector v = Vector::NullaryExpr(5, [&](Eigen::Index) { return rng.normal(); });
        EXPECT_NEAR(weighted_norm(v, Matrix::Identity(5, 5)), v.norm(), 1e-14);
    }
    Matrix neg(1, 1);
    neg << -1.0;
    EXPECT_THROW(weighted_norm(vec({1.0}), neg), NumericalError);
}

TEST(MinEigenvalue, Cases) {
    EXPECT_NEAR(min_eigenvalue(Matrix::Identity(3, 3)), 1.0, 1e-15);
    Matrix a(2, 2);
    a << 2, 1, 1, 2;
    EXPECT_NEAR(min_eigenvalue(a), 1.0, 1e-14);
    const Vector q = vec({0.3, 0.5, 0.1});
    EXPECT_NEAR(min_eigenvalue(q * q.transpose()), 0.0, 1e-12);
}

TEST(KsDistance, Cases) {
    const Cdf b3 = [](double t) { return bernoulli_cdf(t, 0.3); };
    const Cdf b7 = [](double t) { return bernoulli_cdf(t, 0.7); };
    const auto grid = ks_grid(0.0, 1.0, {0.0, 1.0});
    EXPECT_EQ(ks_distance(b3, b3, grid), 0.0);
    EXPECT_NEAR(ks_distance(b3, b7, grid), 0.4, 1e-15);
    const auto g = ks_grid(-1.0, 2.0, {0.25, 0.25});
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    EXPECT_EQ(std::adjacent_find(g.begin(), g.end()), g.end());
    EXPECT_EQ(g.front(), -1.0);
    EXPECT_EQ(g.back(), 2.0);
}

TEST(KsDistance, ChainInequality) {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(6));
        const auto basis = BasisFamily::bernoulli(d);
        const Context p = Vector::NullaryExpr(d, [&](Eigen::Index) { return rng.uniform01(); });
        const WeightVector a = random_simplex(rng, d), b = random_simplex(rng, d);
        const double ks = ks_distance(MixtureCdf{a, &basis, p}, MixtureCdf{b, &basis, p}, ks_grid(0.0, 1.0, {0.0, 1.0}));
        EXPECT_NEAR(ks, oracle::bernoulli_ks(a, b, p), 1e-14);
        EXPECT_LE(ks, std::sqrt(static_cast<double>(d)) * (a - b).norm() + 1e-14);
    }
}

TEST(L2Error, HandCases) {
    const auto m = make_uniform_measure(0.0, 1.0);
    const ContextualCdf zero = [](const Context&, double) { return 0.0; };
    EXPECT_NEAR(l2_error_crps({{vec({0.0}), 1.0}}, zero, m), 0.0, 1e-15);
    EXPECT_NEAR(l2_error_crps({{vec({0.0}), 0.0}}, zero, m), 1.0, 1e-14);

    std::vector<Sample> samples{{vec({0.0}), 0.2}, {vec({1.0}), 0.7}};
    const ContextualCdf perfect = [&](const Context& x, double t) { return t >= (x(0) == 0.0 ? 0.2 : 0.7) ? 1.0 : 0.0; };
    const JumpFn jumps = [](const Context& x) { return std::vector<double>{x(0) == 0.0 ? 0.2 : 0.7}; };
    EXPECT_NEAR(l2_error_crps(samples, perfect, m, jumps), 0.0, 1e-15);
}

TEST(L2Error, UniformForecastClosedForm) {
    // int_0^1 (1{y <= t} - t)^2 dt = y^3 / 3 + (1 - y)^3 / 3
    const auto m = make_uniform_measure(0.0, 1.0);
    const ContextualCdf F = [](const Context&, double t) { return std::clamp(t, 0.0, 1.0); };
    for (double y : {0.0, 0.3, 0.5, 0.9}) {
        const double expected = (y * y * y + (1 - y) * (1 - y) * (1 - y)) / 3.0;
        EXPECT_NEAR(l2_error_crps({{vec({0.0}), y}}, F, m), expected, 1e-14);
    }
}

TEST(L2Error, StepVersionMatchesGeneric) {
    Rng rng(19);
    std::vector<double> train;
    for (int k = 0; k < 30; ++k) train.push_back(rng.normal());
    const Ecdf F(train);
    std::vector<Sample> test;
    for (int k = 0; k < 20; ++k) test.push_back({vec({0.0}), rng.normal()});
    for (const auto& m : {make_gaussian_measure(0.0, 4.0), make_uniform_measure(-2.0, 2.0)}) {
        const double step = l2_error_step(test, F, m);
        const double generic = l2_error_crps(
            test, [&](const Context&, double t) { return F(t); }, m, [&](const Context&) { return F.jumps(); });
        EXPECT_NEAR(step, generic, 1e-12);
    }
    const Ecdf constant(std::vector<double>{2.0, 2.0});
    EXPECT_EQ(l2_error_step({{vec({0.0}), 2.0}}, constant, make_gaussian_measure(0.0, 100.0)), 0.0);
}

TEST(LogLogSlope, Cases) {
    EXPECT_NEAR(fit_loglog_slope({{1, 1}, {10, 0.1}}).first, -1.0, 1e-14);
    EXPECT_NEAR(fit_loglog_slope({{1, 2}, {10, 2}}).first, 0.0, 1e-14);
    EXPECT_NEAR(fit_loglog_slope({{1, 1}, {100, 10}}).first, 0.5, 1e-14);
    EXPECT_THROW(fit_loglog_slope({{1, 1}}), DomainError);
    EXPECT_THROW(fit_loglog_slope({{1, 1}, {1, 2}}), DomainError);
}

TEST(BoundRow, Shape) {
    const auto j = bound_row("epsilon_lambda", {{"n", 10}}, 2.5);
    EXPECT_EQ(j["bound_name"], "epsilon_lambda");
    EXPECT_EQ(j["inputs"]["n"], 10);
    EXPECT_EQ(j["value"], 2.5);
}
