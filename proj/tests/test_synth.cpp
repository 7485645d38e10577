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

bool same_pairs(const Dataset& a, const Dataset& b) {
    if (a.pairs.size() != b.pairs.size()) return false;
    for (std::size_t k = 0; k < a.pairs.size(); ++k)
        if (a.pairs[k].y != b.pairs[k].y || a.pairs[k].x != b.pairs[k].x) return false;
    return true;
}

}  // namespace

TEST(HardInstance, FirstStepsByHand) {
    EXPECT_LE((hard_instance_params(2, 10, 1.0, 1) - vec({0.875, 0.9375})).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((hard_instance_params(2, 10, 1.0, 2) - vec({0.9375, 0.875})).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_THROW(hard_instance_params(1, 10, 1.0, 1), DomainError);
    EXPECT_THROW(hard_instance_params(2, 10, 1.0, 11), DomainError);
}

TEST(HardInstance, FirstDZeroProbabilitiesAreIndependent) {
    for (int d : {2, 3, 5, 8}) {
        Matrix R = Matrix::Zero(d, d);
        for (int j = 1; j <= d; ++j) {
            const Vector q = Vector::Ones(d) - hard_instance_params(d, 100, 1.0, j);
            R += q * q.transpose();
        }
        EXPECT_GT(min_eigenvalue(R), 0.0) << "d = " << d;
    }
}

TEST(HardInstance, ValidityAndPositiveSpectrum) {
    for (auto schedule : {CSchedule::Aligned, CSchedule::Literal})
        for (int d : {2, 3, 5}) {
            const long n = 60;
            const auto ctx = hard_instance_contexts(d, n, schedule);
            Matrix U = Matrix::Zero(d, d);
            for (long j = 0; j < n; ++j) {
                EXPECT_TRUE((ctx[j].array() >= 0.0).all() && (ctx[j].array() <= 1.0).all());
                const Vector q = Vector::Ones(d) - ctx[j];
                U += q * q.transpose();
                if (j + 1 >= d) EXPECT_GT(min_eigenvalue(U), 0.0);
            }
        }
}

TEST(HardInstance, AlignedScheduleStaysInKsFamily) {
    const int d = 5;
    const auto ctx = hard_instance_contexts(d, 200, CSchedule::Aligned);
    const double lo = 1.0 - 1.0 / (d * d), hi = 1.0 - 1.0 / (2.0 * d * d);
    for (std::size_t j = d; j < ctx.size(); ++j) {
        EXPECT_GE(ctx[j].minCoeff(), lo - 1e-15);
        EXPECT_LE(ctx[j].maxCoeff(), hi + 1e-15);
    }
}

TEST(SchemeTwo, DegenerateAndDeterministic) {
    const auto b = BasisFamily::bernoulli(1);
    const ContextAtoms always_one{{vec({0.0})}, {1.0}};
    const auto d0 = sample_scheme2(b, always_one, vec({1.0}), 50, 3);
    for (const auto& s : d0.pairs) EXPECT_EQ(s.y, 0.0);

    const auto poly = BasisFamily::polynomial(3);
    const ContextSampler draw = [](Rng& r) { return Context::Constant(1, r.uniform(0.5, 2.0)); };
    const auto a = sample_scheme2(poly, draw, vec({0.2, 0.3, 0.5}), 200, 42);
    const auto c = sample_scheme2(poly, draw, vec({0.2, 0.3, 0.5}), 200, 42);
    EXPECT_TRUE(same_pairs(a, c));
    for (const auto& s : a.pairs) {
        EXPECT_GE(s.y, 0.0);
        EXPECT_LE(s.y, 1.0 / s.x(0) + 1e-12);
    }
    EXPECT_FALSE(same_pairs(a, sample_scheme2(poly, draw, vec({0.2, 0.3, 0.5}), 200, 43)));
}

TEST(SchemeTwo, MixtureFrequenciesWithinBinomialBand) {
    const auto b = BasisFamily::bernoulli(2);
    const WeightVector theta = vec({0.3, 0.7});
    const Context p = vec({0.2, 0.9});  // zero-probabilities 0.8 and 0.1
    const auto data = sample_scheme2(b, ContextAtoms{{p}, {1.0}}, theta, 10000, 5);
    double zeros = 0;
    for (const auto& s : data.pairs) zeros += s.y == 0.0;
    const double mass = theta.dot(Vector::Ones(2) - p);
    const double sd = std::sqrt(mass * (1 - mass) / 10000.0);
    EXPECT_NEAR(zeros / 10000.0, mass, 3.0 * sd);
}

TEST(SchemeOne, AdversaryVariants) {
    const auto b = BasisFamily::bernoulli(2);
    const WeightVector theta = vec({0.5, 0.5});
    const Context fixed = vec({0.3, 0.6});
    const auto constant = sample_scheme1(b, [&](const std::vector<Sample>&, Rng&) { return fixed; }, theta, 40, 1);
    for (std::size_t k = 0; k < constant.pairs.size(); ++k) EXPECT_EQ(constant.pairs[k].x, fixed);

    std::vector<Context> list;
    for (int k = 0; k < 30; ++k) list.push_back(vec({k / 30.0, 1.0 - k / 30.0}));
    const auto listed = sample_scheme1(b, [&](const std::vector<Sample>& h, Rng&) { return list[h.size()]; }, theta, 30, 2);
    for (std::size_t k = 0; k < list.size(); ++k) EXPECT_EQ(listed.pairs[k].x, list[k]);

    const Adversary flip = [](const std::vector<Sample>& h, Rng& r) {
        const bool last_zero = !h.empty() && h.back().y == 0.0;
        return last_zero ? vec({0.9, 0.1}) : vec({r.uniform01(), 0.5});
    };
    const auto r1 = sample_scheme1(b, flip, theta, 100, 77);
    const auto r2 = sample_scheme1(b, flip, theta, 100, 77);
    EXPECT_TRUE(same_pairs(r1, r2));
}

TEST(Mismatch, ZeroWeightReproducesSchemeTwo) {
    const auto poly = BasisFamily::polynomial(3);
    const auto m = make_uniform_measure(0.0, 2.0);
    const ContextSampler draw = [](Rng& r) { return Context::Constant(1, r.uniform(0.5, 2.0)); };
    const WeightVector theta = vec({0.2, 0.3, 0.5});
    const auto mis = sample_mismatched(poly, cosine_mismatch_component(), 0.0, theta, draw, 300, 9, m);
    EXPECT_TRUE(same_pairs(mis, sample_scheme2(poly, draw, theta, 300, 9)));
    EXPECT_EQ(mis.E_n.norm(), 0.0);
}

TEST(Mismatch, FullWeightSamplesOnlyTheComponent) {
    const auto poly = BasisFamily::polynomial(2);
    const auto m = make_uniform_measure(0.0, 2.0);
    const auto phi_e = cosine_mismatch_component();
    const ContextAtoms at_one{{vec({1.0})}, {1.0}};
    const auto data = sample_mismatched(poly, phi_e, 1.0, vec({0.5, 0.5}), at_one, 4000, 4, m);
    // Under phi_e at x = 1, P(Y <= 0.5) = (1 - cos(pi / 2)) / 2 = 0.5.
    double below = 0;
    for (const auto& s : data.pairs) below += s.y <= 0.5;
    EXPECT_NEAR(below / 4000.0, 0.5, 3.0 * std::sqrt(0.25 / 4000.0));
}

TEST(Mismatch, ZeroErrorFunctionGivesZeroEn) {
    // phi_e equal to the model CDF theta*' Phi makes e identically zero.
    const auto poly = BasisFamily::polynomial(2);
    const WeightVector theta = vec({0.4, 0.6});
    CustomBasis same;
    same.d = 1;
    same.support_hi = 2.0;
    same.eval = [poly, theta](const Context& x, double t) { return Vector::Constant(1, theta.dot(poly.eval(x, t))); };
    const auto m = make_uniform_measure(0.0, 2.0);
    const ContextSampler draw = [](Rng& r) { return Context::Constant(1, r.uniform(0.5, 2.0)); };
    const auto data = sample_mismatched(poly, BasisFamily(same), 0.3, theta, draw, 100, 1, m);
    EXPECT_LE(data.E_n.norm(), 1e-12);
}

TEST(Scaling, CardinalityContract) {
    ScalingConfig c;
    c.d_grid = {3};
    c.n_grid = {50, 100};
    c.reps = 3;
    c.lambdas = {0.1};
    c.metrics = {"l2"};
    const auto r = run_scaling_experiment(c);
    EXPECT_EQ(r.records.size(), 6u);
    EXPECT_EQ(r.aggregates.size(), 2u);
    EXPECT_EQ(r.slopes.size(), 1u);
}

TEST(Scaling, AggregatesAreOrderStatisticsOfRecords) {
    ScalingConfig c;
    c.design = Design::PolynomialRandom;
    c.d_grid = {3};
    c.n_grid = {40};
    c.reps = 9;
    c.metrics = {"l2", "self_normalized"};
    const auto r = run_scaling_experiment(c);
    for (const auto& agg : r.aggregates) {
        std::vector<double> v;
        for (const auto& rec : r.records)
            for (const auto& [name, value] : rec.metrics)
                if (name == agg.metric) v.push_back(value);
        ASSERT_EQ(static_cast<int>(v.size()), agg.count);
        std::sort(v.begin(), v.end());
        double mean = 0.0;
        for (double x : v) mean += x / static_cast<double>(v.size());
        EXPECT_NEAR(agg.mean, mean, 1e-14);
        EXPECT_NEAR(agg.q05, v[0] + 0.4 * (v[1] - v[0]), 1e-14);
        EXPECT_NEAR(agg.q95, v[7] + 0.6 * (v[8] - v[7]), 1e-14);
    }
}

TEST(Scaling, DeterministicAcrossThreadCounts) {
    ScalingConfig c;
    c.d_grid = {3};
    c.n_grid = {100, 200};
    c.reps = 5;
    c.metrics = {"l2", "self_normalized", "mu_min_U"};
    c.threads = 1;
    const auto a = run_scaling_experiment(c);
    c.threads = 4;
    const auto b = run_scaling_experiment(c);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].seed, b.records[k].seed);
        EXPECT_EQ(a.records[k].metrics, b.records[k].metrics);
    }
}

TEST(Coverage, WeakerGuaranteeAndExactRecovery) {
    CoverageConfig c;
    c.d = 3;
    c.n_grid = {500};
    c.reps = 40;
    c.delta = 0.5;
    const auto r = run_coverage_experiment(c);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_GE(r.rows[0].coverage, 0.5);
    EXPECT_EQ(r.rows[0].failures, 0);

    // Noiseless responses u_n = U_n theta* are recovered exactly.
    const auto ctx = hard_instance_contexts(3, 20);
    GramState s = GramState::empty(3);
    for (const auto& p : ctx) s.add(BasisFamily::bernoulli(3), p, 0.0, make_uniform_measure(0.0, 1.0));
    const WeightVector theta = default_theta_star(3);
    const Vector est = unregularized_estimate(s.U, s.U * theta);
    EXPECT_LE(weighted_norm(est - theta, s.U), 1e-9);
    EXPECT_LE(weighted_norm(est - theta, s.U), epsilon_unreg(20, 3, 0.1, min_eigenvalue(s.U)));
}

TEST(Coverage, Validation) {
    CoverageConfig c;
    c.reps = 0;
    EXPECT_THROW(run_coverage_experiment(c), DomainError);
    c.reps = 1;
    c.delta = 1.5;
    EXPECT_THROW(run_coverage_experiment(c), DomainError);
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
    Rng a(1, {2, 3}), b(1, {2, 3}), c(1, {3, 2});
    for (int k = 0; k < 10; ++k) {
        const auto x = a(), y = b();
        EXPECT_EQ(x, y);
    }
    EXPECT_NE(Rng(1, {2, 3})(), c());
    EXPECT_NE(Rng(1).substream(1)(), Rng(1).substream(2)());
    double mean = 0.0;
    Rng u(99);
    for (int k = 0; k < 100000; ++k) mean += u.uniform01() / 100000.0;
    EXPECT_NEAR(mean, 0.5, 0.005);
}
