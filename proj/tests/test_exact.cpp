#include <gtest/gtest.h>

#include <random>

#include "anondet/exact.hpp"
#include "anondet/projection.hpp"
#include "anondet/sim.hpp"
#include "anondet/validation/acceptance.hpp"
#include "anondet/validation/oracles.hpp"

using namespace anondet;

namespace {

Dist random_dist(std::mt19937_64& rng, std::size_t d) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(d);
    for (auto& v : w) v = u(rng);
    return Dist::normalized(w);
}

Profile random_profile(std::mt19937_64& rng, std::vector<int> nu, std::size_t d) {
    std::vector<Dist> p0, p1;
    for (std::size_t k = 0; k < nu.size(); ++k) {
        p0.push_back(random_dist(rng, d));
        p1.push_back(random_dist(rng, d));
    }
    return Profile::from_counts(p0, p1, std::move(nu));
}

Profile bern2(double a0, double b0, double a1, double b1, std::vector<int> nu) {
    return Profile::from_counts({Dist::bernoulli(a0), Dist::bernoulli(b0)}, {Dist::bernoulli(a1), Dist::bernoulli(b1)},
                                std::move(nu));
}

} // namespace

TEST(OrbitMeasure, Examples) {
    const double p = 0.3;
    auto one = Profile::from_counts({Dist::bernoulli(p)}, {Dist::bernoulli(p)}, {2});
    EXPECT_NEAR(symmetrized_log_measure(0, CompositeType({1, 1}), one), std::log2(2 * p * (1 - p)), 1e-12);

    const double a = 0.2, b = 0.7;
    auto two = bern2(a, b, a, b, {1, 1});
    EXPECT_NEAR(symmetrized_log_measure(0, CompositeType({1, 1}), two), std::log2(a * (1 - b) + b * (1 - a)), 1e-12);
}

TEST(OrbitMeasure, MatchesBruteForce) {
    std::mt19937_64 rng(21);
    std::vector<std::vector<int>> shapes = {{3}, {2, 1}, {1, 1, 1}, {4, 3}, {2, 2, 3}, {5, 2}, {3, 2}};
    for (std::size_t d = 2; d <= 3; ++d)
        for (const auto& nu : shapes) {
            Profile p = random_profile(rng, nu, d);
            TypeSpace space(p.n(), d);
            auto sigma = default_labeling(p.nu());
            auto orb = orbit_tables(p);
            for (int theta : {0, 1}) {
                auto brute = oracle::type_distribution(p, theta, sigma, space);
                for (std::size_t i = 0; i < space.size(); ++i) {
                    double dp = std::exp2(symmetrized_log_measure(theta, space[i], p));
                    EXPECT_NEAR(dp, brute[i], 1e-10 * brute[i] + 1e-300);
                    EXPECT_NEAR(std::exp2(orb.log_p(theta)[i]), brute[i], 1e-10 * brute[i] + 1e-300);
                }
            }
        }
}

TEST(OrbitMeasure, SigmaInvariance) {
    std::mt19937_64 rng(22);
    for (auto nu : std::vector<std::vector<int>>{{2, 2}, {3, 3}, {4, 2}, {2, 2, 2}, {1, 2, 3}}) {
        Profile p = random_profile(rng, nu, 2);
        TypeSpace space(p.n(), 2);
        auto labelings = enumerate_labelings(p.nu());
        for (int theta : {0, 1}) {
            auto ref = oracle::type_distribution(p, theta, labelings.front(), space);
            for (const auto& s : labelings) {
                auto got = oracle::type_distribution(p, theta, s, space);
                for (std::size_t i = 0; i < space.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-14 * ref[i] + 1e-300);
            }
        }
    }
}

TEST(OrbitMeasure, TotalMass) {
    std::mt19937_64 rng(23);
    for (int n = 1; n <= 30; n += 7) {
        Profile p = random_profile(rng, apportion(std::vector<double>{0.3, 0.3, 0.4}, n), 3);
        auto orb = orbit_tables(p);
        for (int theta : {0, 1}) EXPECT_NEAR(std::exp2(log2_sum(orb.log_p(theta))), 1.0, 1e-9);
    }
}

TEST(OrbitMeasure, RejectsMismatchedType) {
    auto p = bern2(0.1, 0.2, 0.3, 0.4, {1, 1});
    EXPECT_THROW(symmetrized_log_measure(0, CompositeType({2, 1}), p), InvalidArgument);
    EXPECT_THROW(symmetrized_log_measure(0, CompositeType({1, 0, 1}), p), InvalidArgument);
}

TEST(Mlr, Examples) {
    auto one = Profile::from_counts({Dist::bernoulli(0.2)}, {Dist::bernoulli(0.6)}, {1});
    EXPECT_NEAR(mlr(CompositeType({0, 1}), one), 0.6 / 0.2, 1e-12);
    EXPECT_NEAR(mlr(CompositeType({1, 0}), one), 0.4 / 0.8, 1e-12);

    // x = (0, 1) with groups Ber(a), Ber(b).
    const double a0 = 0.2, b0 = 0.7, a1 = 0.6, b1 = 0.4;
    auto two = bern2(a0, b0, a1, b1, {1, 1});
    double num = (1 - a1) * b1 + a1 * (1 - b1);
    double den = (1 - a0) * b0 + a0 * (1 - b0);
    EXPECT_NEAR(mlr(CompositeType({1, 1}), two), num / den, 1e-12);
}

TEST(Mlr, MatchesBruteForceOverLabelings) {
    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 5; ++rep) {
        Profile p = random_profile(rng, {3, 2}, 2);
        for (const auto& v : enumerate_types(5, 2))
            EXPECT_NEAR(mlr(v, p), oracle::mixture_ratio(v, p), 1e-10 * oracle::mixture_ratio(v, p));
    }
}

TEST(Mlr, UndefinedWhenBothMeasuresVanish) {
    auto p = Profile::from_counts({Dist::point_mass(2, 0)}, {Dist::point_mass(2, 0)}, {2});
    EXPECT_THROW(mlr(CompositeType({0, 2}), p), UndefinedRatio);
}

TEST(Glrt, Examples) {
    auto one = Profile::from_counts({Dist::bernoulli(0.3)}, {Dist::bernoulli(0.8)}, {4});
    for (const auto& v : enumerate_types(4, 2)) EXPECT_NEAR(log_glrt(v, one), log_mlr(v, one), 1e-12);

    const double a0 = 0.2, b0 = 0.7, a1 = 0.6, b1 = 0.4;
    auto two = bern2(a0, b0, a1, b1, {1, 1});
    double num = std::max((1 - a1) * b1, a1 * (1 - b1));
    double den = std::max((1 - a0) * b0, a0 * (1 - b0));
    EXPECT_NEAR(glrt(CompositeType({1, 1}), two), num / den, 1e-12);
}

TEST(Glrt, MatchesBruteForceMax) {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 5; ++rep) {
        Profile p = random_profile(rng, {3, 2}, 2);
        for (const auto& v : enumerate_types(5, 2))
            EXPECT_NEAR(glrt(v, p), oracle::max_ratio(v, p), 1e-10 * oracle::max_ratio(v, p));
    }
}

TEST(Glrt, MaxPlusDpMatchesEnumeration) {
    std::mt19937_64 rng(26);
    for (int rep = 0; rep < 4; ++rep) {
        Profile p = random_profile(rng, {3, 2, 2}, 3);
        for (const auto& v : enumerate_types(p.n(), 3))
            for (int theta : {0, 1})
                EXPECT_NEAR(detail::capacity_dp(v, p.nu(), p.p(theta), detail::Reduce::Max),
                            glrt_log_max(theta, v, p), 1e-10);
    }
}

TEST(Calibration, EpsilonLimits) {
    auto p = bern2(0.2, 0.6, 0.7, 0.9, {3, 3});
    auto orb = orbit_tables(p);
    auto near_one = exact_errors(calibrate_np(orb, 1.0 - 1e-12), orb);
    EXPECT_LT(near_one.pm, 1e-9);

    auto tiny = calibrate_np(orb, 1e-9);
    auto stat = log_mlr_table(orb);
    std::size_t top = static_cast<std::size_t>(std::max_element(stat.begin(), stat.end()) - stat.begin());
    for (std::size_t i = 0; i < tiny.phi.size(); ++i) {
        if (i == top) {
            EXPECT_GT(tiny.phi[i], 0.0);
            EXPECT_LT(tiny.phi[i], 1.0);
        } else {
            EXPECT_EQ(tiny.phi[i], 0.0);
        }
    }
    EXPECT_THROW(calibrate_np(orb, 0.0), InvalidArgument);
    EXPECT_THROW(calibrate_np(orb, 1.0), InvalidArgument);
}

TEST(Calibration, MatchesScanOracle) {
    auto p = bern2(0.2, 0.6, 0.7, 0.9, {6, 4});
    auto orb = orbit_tables(p);
    auto t = calibrate_np(orb, 0.1);
    auto stat = log_mlr_table(orb);
    std::vector<double> p0;
    for (double lp : orb.log_p0) p0.push_back(std::exp2(lp));
    auto scan = oracle::scan_threshold(stat, p0, 0.1);
    EXPECT_NEAR(t.log2_tau, scan.tau, 1e-12);
    EXPECT_NEAR(t.gamma, scan.gamma, 1e-9);

    double pf = 0.0;
    for (std::size_t i = 0; i < p0.size(); ++i) pf += t.phi[i] * p0[i];
    EXPECT_NEAR(pf, 0.1, 1e-12);
    EXPECT_NEAR(exact_errors(t, orb).pf, 0.1, 1e-12);
}

TEST(ExactErrors, ConstantTests) {
    auto p = bern2(0.2, 0.6, 0.7, 0.9, {3, 2});
    auto orb = orbit_tables(p);
    auto all = exact_errors(constant_test(orb.space, 1.0), orb);
    EXPECT_NEAR(all.pf, 1.0, 1e-12);
    EXPECT_EQ(all.pm, 0.0);
    auto none = exact_errors(constant_test(orb.space, 0.0), orb);
    EXPECT_EQ(none.pf, 0.0);
    EXPECT_NEAR(none.pm, 1.0, 1e-12);
}

TEST(BetaStar, IdenticalAndDisjointHypotheses) {
    auto same = bern2(0.2, 0.6, 0.2, 0.6, {4, 3});
    EXPECT_NEAR(beta_star(same, 0.1), 0.9, 1e-9);
    auto disjoint = Profile::from_counts({Dist::point_mass(2, 0), Dist::point_mass(2, 0)},
                                         {Dist::point_mass(2, 1), Dist::point_mass(2, 1)}, {2, 3});
    EXPECT_EQ(beta_star(disjoint, 0.1), 0.0);
}

TEST(BetaStar, TrendMatchesExponent) {
    // At these sizes the rate still carries a b/sqrt(n) term. Fix the exponent,
    // fit only b, and check the n = 40 rate against that trend.
    for (auto prof : {acceptance::demo_profile(), acceptance::binary_profile({0.1, 0.3}, {0.6, 0.9}, {0.5, 0.5})}) {
        const double e = exponent_np(prof);
        std::vector<std::pair<int, double>> rate;
        for (int n = 20; n <= 40; n += 5)
            rate.emplace_back(n, -log2_beta_star(orbit_tables(prof.at_n(n)), 0.1) / n);
        double num = 0.0, den = 0.0;
        for (auto [n, r] : rate) {
            const double x = 1.0 / std::sqrt(n);
            num += x * (r - e - 0.5 * std::log2(n) / n);
            den += x * x;
        }
        const double b = num / den;
        EXPECT_LT(b, 0.0);
        const double trend40 = e + b / std::sqrt(40.0) + 0.5 * std::log2(40.0) / 40.0;
        EXPECT_NEAR(rate.back().second, trend40, 0.1);
    }
}

TEST(NeymanPearson, MlrtIsUndominated) {
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int n = 3; n <= 5; ++n) {
        Profile p = random_profile(rng, apportion(std::vector<double>{0.5, 0.5}, n), 2);
        auto orb = orbit_tables(p);
        auto star = exact_errors(calibrate_np(orb, 0.15), orb);
        const std::size_t m = orb.space->size();
        auto check = [&](const TestTable& t) {
            auto e = exact_errors(t, orb);
            EXPECT_FALSE(e.pf <= star.pf + 1e-12 && e.pm < star.pm - 1e-12);
        };
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
            TestTable t = constant_test(orb.space, 0.0);
            for (std::size_t i = 0; i < m; ++i) t.phi[i] = (mask >> i) & 1u ? 1.0 : 0.0;
            check(t);
        }
        for (int s = 0; s < 10000; ++s) {
            TestTable t = constant_test(orb.space, 0.0);
            for (auto& v : t.phi) v = unit(rng);
            check(t);
        }
    }
}

TEST(NeymanPearson, GlrtStrictlySuboptimal) {
    Profile p = acceptance::glrt_gap_profile();
    auto orb = orbit_tables(p);
    auto opt = exact_errors(calibrate_np(orb, acceptance::kGlrtGapEpsilon), orb);
    auto gl = exact_errors(calibrate_glrt(p, orb, acceptance::kGlrtGapEpsilon), orb);
    EXPECT_NEAR(gl.pf, opt.pf, 1e-12);
    EXPECT_GT(gl.pm, opt.pm + 1e-3);
}

TEST(Symmetrize, SymmetricTestIsFixedPoint) {
    auto p = bern2(0.2, 0.6, 0.7, 0.9, {3, 2});
    auto orb = orbit_tables(p);
    auto t = calibrate_np(orb, 0.2);
    SequenceTest psi{5, 2, {}};
    for (std::uint64_t c = 0; c < sequence_count(5, 2); ++c)
        psi.psi.push_back(t.value(type_of(decode_sequence(c, 5, 2), 2)));
    auto back = symmetrize(psi, p);
    for (std::size_t i = 0; i < t.phi.size(); ++i) EXPECT_NEAR(back.phi[i], t.phi[i], 1e-15);
    auto worst = worst_case_errors(psi, p);
    auto exact = exact_errors(t, orb);
    EXPECT_NEAR(worst.pf, exact.pf, 1e-12);
    EXPECT_NEAR(worst.pm, exact.pm, 1e-12);
}

TEST(Symmetrize, IndicatorOfOneSequence) {
    auto p = bern2(0.2, 0.6, 0.7, 0.9, {3, 2});
    SequenceTest psi{5, 2, std::vector<double>(32, 0.0)};
    const std::uint64_t code = 0b01101;
    psi.psi[code] = 1.0;
    auto t = symmetrize(psi, p);
    auto v = type_of(decode_sequence(code, 5, 2), 2);
    EXPECT_NEAR(t.value(v), 1.0 / binomial(5, v[1]), 1e-15);
    for (std::size_t i = 0; i < t.phi.size(); ++i)
        if ((*t.space)[i] != v) EXPECT_EQ(t.phi[i], 0.0);
}

TEST(Symmetrize, NeverIncreasesWorstCaseErrors) {
    std::mt19937_64 rng(28);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Profile p = random_profile(rng, {3, 2}, 2);
    auto orb = orbit_tables(p);
    for (int rep = 0; rep < 100; ++rep) {
        SequenceTest psi{5, 2, {}};
        for (int c = 0; c < 32; ++c) psi.psi.push_back(rep % 2 ? unit(rng) : std::round(unit(rng)));
        auto worst = worst_case_errors(psi, p);
        auto sym = exact_errors(symmetrize(psi, p), orb);
        EXPECT_LE(sym.pf, worst.pf + 1e-12);
        EXPECT_LE(sym.pm, worst.pm + 1e-12);
    }
}

TEST(Hoeffding, Examples) {
    auto p = bern2(0.2, 0.8, 0.7, 0.9, {2, 2});
    EXPECT_EQ(hoeffding_test(CompositeType({2, 2}), p, 0.01), 0);
    EXPECT_EQ(hoeffding_test(CompositeType({1, 3}), p, 0.0), 1);
    EXPECT_THROW(hoeffding_test(CompositeType({1, 3}), p, -0.1), InvalidArgument);
}

TEST(Hoeffding, AcceptanceSetIsAScannedInterval) {
    auto p = bern2(0.2, 0.8, 0.7, 0.9, {10, 10});
    auto t = hoeffding_table(p, 0.05);
    // Scan k = count of symbol 1 for the H0 region kl(k/n, 1/2) <= delta.
    int lo = -1, hi = -1;
    for (int k = 0; k <= 20; ++k)
        if (oracle::bernoulli_kl(k / 20.0, 0.5) <= 0.05) {
            if (lo < 0) lo = k;
            hi = k;
        }
    ASSERT_GE(lo, 0);
    for (int k = 0; k <= 20; ++k) {
        double expect = (k >= lo && k <= hi) ? 0.0 : 1.0;
        EXPECT_EQ(t.value(CompositeType({20 - k, k})), expect) << "k=" << k;
    }
}

TEST(Sequences, CapabilityLimit) {
    EXPECT_THROW(sequence_count(21, 2), CapabilityError);
    EXPECT_EQ(sequence_count(20, 2), 1u << 20);
}
