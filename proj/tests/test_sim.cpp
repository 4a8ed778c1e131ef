#include <gtest/gtest.h>

#include "anondet/sim.hpp"
#include "anondet/validation/acceptance.hpp"

using namespace anondet;

TEST(TestIds, Parsing) {
    EXPECT_EQ(parse_test_id("mlrt:0.1").kind, TestKind::Mlrt);
    EXPECT_EQ(parse_test_id("glrt:0.2").kind, TestKind::Glrt);
    EXPECT_EQ(parse_test_id("hoeffding:0.05").kind, TestKind::Hoeffding);
    EXPECT_EQ(parse_test_id("phi_eff").kind, TestKind::PhiEff);
    EXPECT_EQ(parse_test_id("phi_lambda:-0.1").kind, TestKind::PhiLambda);
    for (const char* bad : {"", "mlrt", "mlrt:x", "nope:0.1", "phi_eff:1", "mlrt:0.1junk"})
        EXPECT_THROW(parse_test_id(bad), InvalidArgument) << bad;
}

TEST(Rng, CounterBasedAndUniform) {
    EXPECT_EQ(counter_uniform(1, 0, 5, 3), counter_uniform(1, 0, 5, 3));
    EXPECT_NE(counter_uniform(1, 0, 5, 3), counter_uniform(1, 0, 5, 4));
    EXPECT_NE(counter_uniform(1, 0, 5, 3), counter_uniform(2, 0, 5, 3));
    double s = 0.0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        double u = counter_uniform(9, 1, i, 0);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
    }
    EXPECT_NEAR(s / 100000, 0.5, 0.005);
}

TEST(Wilson, Interval) {
    auto i = wilson_interval(50, 100);
    EXPECT_NEAR(0.5 * (i.lo + i.hi), 0.5, 1e-12);
    EXPECT_LT(i.lo, 0.5);
    EXPECT_GT(i.hi, 0.5);
    auto z = wilson_interval(0, 1000);
    EXPECT_EQ(z.lo, 0.0);
    EXPECT_GT(z.hi, 0.0);
    auto f = wilson_interval(1000, 1000);
    EXPECT_EQ(f.hi, 1.0);
    EXPECT_LT(f.lo, 1.0);
}

TEST(MonteCarlo, MatchesExactErrorsAtLargeTrialCount) {
    Profile p = acceptance::demo_profile().at_n(8);
    auto orb = orbit_tables(p);
    auto exact = exact_errors(calibrate_np(orb, 0.1), orb);
    const long trials = 1000000;
    auto r = simulate_errors(p, "mlrt:0.1", trials, 2024);
    auto sigma = [&](double q) { return std::sqrt(q * (1 - q) / trials); };
    EXPECT_LE(std::abs(r.pf - exact.pf), 3 * sigma(exact.pf));
    EXPECT_LE(std::abs(r.pm - exact.pm), 3 * sigma(exact.pm));
}

TEST(MonteCarlo, IdenticalHypotheses) {
    Profile p = acceptance::binary_profile({0.3, 0.7}, {0.3, 0.7}, {0.5, 0.5}).at_n(6);
    auto r = simulate_errors(p, "mlrt:0.1", 100000, 5);
    EXPECT_NEAR(r.pf, 0.1, 0.005);
    EXPECT_NEAR(r.pm, 0.9, 0.005);
}

TEST(MonteCarlo, DeterministicForSeed) {
    Profile p = acceptance::demo_profile().at_n(10);
    auto a = simulate_errors(p, "glrt:0.2", 20000, 77);
    auto b = simulate_errors(p, "glrt:0.2", 20000, 77);
    EXPECT_TRUE(a == b);
    auto c = simulate_errors(p, "glrt:0.2", 20000, 78);
    EXPECT_FALSE(a == c);
}

TEST(MonteCarlo, ConsistentAcrossRepeatedRuns) {
    Profile p = acceptance::demo_profile().at_n(8);
    auto orb = orbit_tables(p);
    struct Case {
        std::string id;
        TestTable table;
    };
    std::vector<Case> cases = {{"mlrt:0.1", calibrate_np(orb, 0.1)},
                               {"hoeffding:0.05", hoeffding_table(p, 0.05)},
                               {"phi_eff", phi_eff_table(divergence_table(p, orb.space))}};
    const long trials = 4000;
    for (const auto& c : cases) {
        auto exact = exact_errors(c.table, orb);
        int inside = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            auto r = simulate_errors(p, c.id, trials, 1000 + seed);
            bool ok = true;
            for (auto [est, q] : {std::pair{r.pf, exact.pf}, std::pair{r.pm, exact.pm}})
                ok = ok && std::abs(est - q) <= 4 * std::sqrt(q * (1 - q) / trials) + 1e-15;
            inside += ok ? 1 : 0;
        }
        EXPECT_GE(inside, 99) << c.id;
    }
}

TEST(MonteCarlo, RejectsBadInputs) {
    Profile p = acceptance::demo_profile().at_n(4);
    EXPECT_THROW(simulate_errors(p, "mlrt:0.1", 0, 1), InvalidArgument);
    EXPECT_THROW(simulate_errors(p, "bogus", 10, 1), InvalidArgument);
    EXPECT_THROW(simulate_errors(p, "mlrt:0.1", 10, 1, {0, 0, 0, 1}), InvalidArgument);
}

TEST(DecayFit, SyntheticExponential) {
    std::vector<std::pair<int, double>> pts;
    for (int n = 10; n <= 50; n += 10) pts.emplace_back(n, -0.37 * n);
    auto f = decay_fit(pts);
    EXPECT_NEAR(f.slope, 0.37, 1e-12);
    EXPECT_NEAR(f.residual, 0.0, 1e-9);
}

TEST(DecayFit, ErrorsAndWarnings) {
    std::vector<std::pair<int, double>> repeated = {{10, -1.0}, {10, -2.0}, {10, -3.0}};
    EXPECT_THROW(decay_fit(repeated), InvalidArgument);
    std::vector<std::pair<int, double>> zeros = {{10, -1.0}, {20, -kInf}, {30, -3.0}, {40, -4.0}};
    auto f = decay_fit(zeros);
    EXPECT_EQ(f.warnings.size(), 1u);
    std::vector<std::pair<int, double>> few = {{10, -1.0}, {20, -2.0}};
    EXPECT_THROW(decay_fit(few), InvalidArgument);
}

TEST(DecayFit, BetaStarSlopeNearExponent) {
    Profile p = acceptance::demo_profile();
    std::vector<std::pair<int, double>> pts;
    for (int n = 20; n <= 100; n += 20) pts.emplace_back(n, log2_beta_star(orbit_tables(p.at_n(n)), 0.1));
    EXPECT_NEAR(decay_fit(pts).slope, exponent_np(p), 0.1);
}

TEST(Sanov, WholeSimplex) {
    Profile p = acceptance::demo_profile();
    TypeRegion all{"whole", [](const Dist&) { return 1.0; }, 1e-9};
    std::vector<int> ns{10, 20, 30, 40};
    auto r = sanov_check(p, all, ns, 0);
    for (double lp : r.log2_prob) EXPECT_NEAR(lp, 0.0, 1e-9);
    EXPECT_NEAR(r.fit.slope, 0.0, 1e-9);
    EXPECT_NEAR(r.infima.closure, 0.0, 1e-12);
    EXPECT_NEAR(r.infima.interior, 0.0, 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(Sanov, KlBallComplementDecaysAtLeastDelta) {
    Profile p = acceptance::demo_profile();
    const Dist m0 = mixture(p, 0);
    const double delta = 0.1;
    TypeRegion g{"kl", [m0, delta](const Dist& t) { return kl(t, m0) - delta; }, 1e-9};
    std::vector<int> ns;
    for (int n = 20; n <= 200; n += 20) ns.push_back(n);
    auto r = sanov_check(p, g, ns, 0);
    EXPECT_GE(r.fit.slope, delta);
    EXPECT_TRUE(r.pass);
}

TEST(Sanov, HalfSimplexNearGridInfimum) {
    Profile p = acceptance::demo_profile();
    TypeRegion g{"half", [](const Dist& t) { return t[1] - 0.6; }, 1e-9};
    std::vector<int> ns;
    for (int n = 20; n <= 200; n += 20) ns.push_back(n);
    auto r = sanov_check(p, g, ns, 0);
    EXPECT_NEAR(r.fit.slope, r.infima.closure, 0.05);
}

TEST(Sanov, DemoRegionsSatisfyTheSandwich) {
    Profile p = acceptance::demo_profile();
    std::vector<int> ns;
    for (int n = 20; n <= 200; n += 20) ns.push_back(n);
    for (const auto& g : demo_regions(p)) {
        auto r = sanov_check(p, g, ns, 0);
        EXPECT_TRUE(r.pass) << g.name << " slope " << r.fit.slope << " in [" << r.infima.closure << ", "
                            << r.infima.interior << "]";
    }
}

TEST(Sanov, EmptyRegionIsAnError) {
    Profile p = acceptance::demo_profile();
    TypeRegion none{"none", [](const Dist&) { return -1.0; }, 1e-9};
    std::vector<int> ns{10, 20, 30};
    EXPECT_THROW(sanov_check(p, none, ns, 0), InvalidArgument);
}
