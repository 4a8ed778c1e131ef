#include <gtest/gtest.h>

#include <random>

#include "anondet/chernoff.hpp"
#include "anondet/validation/acceptance.hpp"
#include "anondet/validation/oracles.hpp"

using namespace anondet;
using acceptance::binary_profile;

TEST(PhiEff, Centers) {
    Profile p = acceptance::demo_profile().at_n(5);  // M_0 = Ber(0.4), M_1 = Ber(0.8)
    EXPECT_EQ(phi_eff(CompositeType({3, 2}), p), 0);
    EXPECT_EQ(phi_eff(CompositeType({1, 4}), p), 1);
}

TEST(PhiEff, MatchesGridOracleSign) {
    Profile p = binary_profile({0.1, 0.3}, {0.7, 0.9}, {0.5, 0.5}).at_n(20);
    // The instance is symmetric about T = 1/2, where the tie goes to 1.
    EXPECT_EQ(phi_eff(CompositeType({10, 10}), p), 1);
    for (int c1 : {9, 11}) {
        const double t = c1 / 20.0;
        const double d = oracle::grid_projection(t, p.p0(), p.alpha()) - oracle::grid_projection(t, p.p1(), p.alpha());
        ASSERT_GT(std::abs(d), 1e-3);
        EXPECT_EQ(phi_eff(CompositeType({20 - c1, c1}), p), d >= 0.0 ? 1 : 0) << c1;
    }
}

TEST(PhiEff, SingleThresholdCrossingOnBinaryTypes) {
    for (auto prof : {acceptance::demo_profile(), binary_profile({0.1, 0.5, 0.3}, {0.6, 0.7, 0.95}, {0.2, 0.3, 0.5})}) {
        Profile p = prof.at_n(200);
        auto div = divergence_table(p);
        auto t = phi_eff_table(div);
        // Types are ordered by decreasing count of symbol 0, i.e. increasing T(1).
        int changes = 0;
        for (std::size_t i = 1; i < t.phi.size(); ++i) changes += t.phi[i] != t.phi[i - 1] ? 1 : 0;
        EXPECT_EQ(changes, 1);
        EXPECT_EQ(t.phi.front(), 0.0);
        EXPECT_EQ(t.phi.back(), 1.0);
    }
}

TEST(PhiLambda, Examples) {
    Profile p = acceptance::demo_profile().at_n(5);
    const auto types = enumerate_types(5, 2);
    for (const auto& v : types) {
        EXPECT_EQ(phi_lambda(v, p, -kInf), 1);
        EXPECT_EQ(phi_lambda(v, p, 0.0), phi_eff(v, p));
    }
    const double top = f_value(Dist::bernoulli(0.8), p.p0(), p.alpha());
    EXPECT_EQ(phi_lambda(CompositeType({1, 4}), p, top), 1);
    EXPECT_EQ(phi_lambda(CompositeType({1, 4}), p, top + 1e-3), 0);
}

TEST(PhiLambda, ExtendedRealComparisons) {
    EXPECT_THROW(difference_at_least(kInf, kInf, 0.0), UndefinedComparison);
    EXPECT_TRUE(difference_at_least(kInf, 2.0, 5.0));
    EXPECT_FALSE(difference_at_least(2.0, kInf, -5.0));
    EXPECT_TRUE(difference_at_least(2.0, kInf, -kInf));
    EXPECT_TRUE(difference_at_least(1.0, 1.0, 1e-10));
}

TEST(PhiLambda, TableAssignsZeroOutsideBothDomains) {
    // Group 0 emits only symbol 0 and group 1 only symbol 1 under both
    // hypotheses, so every type other than (1, 1) lies outside both domains.
    auto p = Profile::from_counts({Dist::point_mass(2, 0), Dist::point_mass(2, 1)},
                                  {Dist::point_mass(2, 0), Dist::point_mass(2, 1)}, {1, 1});
    auto t = phi_lambda_table(divergence_table(p), 0.0);
    EXPECT_EQ(t.value(CompositeType({2, 0})), 0.0);
    EXPECT_EQ(t.value(CompositeType({0, 2})), 0.0);
    EXPECT_EQ(t.value(CompositeType({1, 1})), 1.0);
}

TEST(PackingRadius, Examples) {
    EXPECT_NEAR(packing_radius(binary_profile({0.3, 0.6}, {0.3, 0.6}, {0.5, 0.5})).radius, 0.0, 1e-9);
    EXPECT_NEAR(packing_radius(binary_profile({0.2, 0.8}, {0.8, 0.2}, {0.5, 0.5})).radius, 0.0, 1e-9);
    for (auto [a, b] : {std::pair{0.2, 0.8}, std::pair{0.1, 0.4}, std::pair{0.05, 0.9}}) {
        auto r = packing_radius(binary_profile({a}, {b}, {1.0}));
        EXPECT_NEAR(r.radius, oracle::chernoff_information(Dist::bernoulli(a), Dist::bernoulli(b)), 1e-6);
    }
    std::vector<Dist> p0{Dist({0.2, 0.3, 0.5})}, p1{Dist({0.6, 0.3, 0.1})};
    Profile ternary(p0, p1, {1.0});
    EXPECT_NEAR(packing_radius(ternary).radius, oracle::chernoff_information(p0[0], p1[0]), 1e-6);
}

TEST(PackingRadius, EqualizesOnBinaryAlphabet) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> par(0.05, 0.95);
    for (int i = 0; i < 20; ++i) {
        auto prof = binary_profile({par(rng), par(rng)}, {par(rng), par(rng)}, {0.4, 0.6});
        auto r = packing_radius(prof);
        if (r.radius < 1e-9) continue;
        EXPECT_LE(std::abs(r.f0 - r.f1), 1e-3);
        EXPECT_NEAR(r.radius, oracle::packing_radius_bisection(prof), 1e-6);
    }
}

TEST(PackingRadius, TernaryMatchesSimplexGrid) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 3; ++i) {
        std::vector<Dist> p0{acceptance::random_dist(rng, 3), acceptance::random_dist(rng, 3)};
        std::vector<Dist> p1{acceptance::random_dist(rng, 3), acceptance::random_dist(rng, 3)};
        Profile prof(p0, p1, {0.5, 0.5});
        auto r = packing_radius(prof);
        double grid = kInf;
        const int N = 50;
        for (const auto& c : enumerate_types(N, 3)) {
            auto f = f_pair(c.as_dist(), prof);
            grid = std::min(grid, std::max(f.f0, f.f1));
        }
        EXPECT_LE(r.radius, grid + 1e-9);
        EXPECT_GE(r.radius, grid - 0.02);
        EXPECT_NEAR(r.radius, std::max(r.f0, r.f1), 1e-12);
    }
}

TEST(Region, CornersMatchNeymanPearsonExponents) {
    Profile p = acceptance::demo_profile();
    auto [lo, hi] = lambda_range(p);
    std::vector<double> ends{lo, hi};
    auto rb = region_boundary(p, ends);
    EXPECT_NEAR(rb.points[0].e0, 0.0, 1e-4);
    EXPECT_NEAR(rb.points[0].e1, exponent_np(p), 1e-4);
    EXPECT_NEAR(rb.points[1].e0, exponent_np(p.swapped()), 1e-4);
    EXPECT_NEAR(rb.points[1].e1, 0.0, 1e-4);
}

TEST(Region, IdenticalHypothesesGiveOrigin) {
    Profile p = binary_profile({0.3, 0.6}, {0.3, 0.6}, {0.5, 0.5});
    std::vector<double> zero{0.0};
    auto rb = region_boundary(p, zero);
    EXPECT_NEAR(rb.points[0].e0, 0.0, 1e-12);
    EXPECT_NEAR(rb.points[0].e1, 0.0, 1e-12);
}

TEST(Region, GridInvariants) {
    for (auto p : {acceptance::demo_profile(), binary_profile({0.1, 0.4}, {0.5, 0.8}, {0.3, 0.7})}) {
        auto [lo, hi] = lambda_range(p);
        std::vector<double> lambdas;
        for (int i = 0; i <= 20; ++i) lambdas.push_back(lo + (hi - lo) * i / 20.0);
        lambdas.push_back(0.0);
        auto rb = region_boundary(p, lambdas);
        const double rstar = packing_radius(p).radius;
        EXPECT_TRUE(rb.monotone);
        for (const auto& pt : rb.points) {
            EXPECT_GE(std::min(pt.e0, pt.e1), 0.0);
            if (pt.lambda == 0.0) {
                EXPECT_GE(std::max(pt.e0, pt.e1), rstar - 1e-6);
                EXPECT_LE(std::min(pt.e0, pt.e1), rstar + 1e-6);
            }
        }
    }
}

TEST(Region, RejectsLambdaOutsideRange) {
    Profile p = acceptance::demo_profile();
    auto [lo, hi] = lambda_range(p);
    std::vector<double> bad{hi + 0.1};
    EXPECT_THROW(region_boundary(p, bad), InvalidArgument);
    std::vector<double> bad2{lo - 0.1};
    EXPECT_THROW(region_boundary(p, bad2), InvalidArgument);
}
