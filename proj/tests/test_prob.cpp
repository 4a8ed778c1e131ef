#include <gtest/gtest.h>

#include <random>

#include "anondet/prob.hpp"

using namespace anondet;

namespace {

Dist random_dist(std::mt19937_64& rng, std::size_t d) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(d);
    for (auto& v : w) v = e(rng);
    return Dist::normalized(w);
}

} // namespace

TEST(Kl, Examples) {
    EXPECT_DOUBLE_EQ(kl(Dist::bernoulli(0.5), Dist::bernoulli(0.5)), 0.0);
    EXPECT_NEAR(kl(Dist::bernoulli(0.9), Dist::bernoulli(0.1)), 2.53594, 5e-6);
    EXPECT_EQ(kl(Dist::bernoulli(0.5), Dist::point_mass(2, 0)), kInf);
    EXPECT_NEAR(kl(Dist::bernoulli(0.2), Dist::bernoulli(0.8)), 1.2, 1e-12);
}

TEST(Kl, ZeroTermsAreDropped) {
    EXPECT_NEAR(kl(Dist::point_mass(2, 0), Dist::bernoulli(0.5)), 1.0, 1e-15);
}

TEST(Kl, NonnegativeWithEqualityOnlyAtIdentity) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        std::size_t d = 2 + i % 4;
        Dist p = random_dist(rng, d), q = random_dist(rng, d);
        EXPECT_GE(kl(p, q), -1e-12);
        EXPECT_NEAR(kl(p, p), 0.0, 1e-12);
        if (l1_distance(p, q) > 1e-6) EXPECT_GT(kl(p, q), 0.0);
    }
}

TEST(Kl, Pinsker) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 2000; ++i) {
        std::size_t d = 2 + i % 5;
        Dist p = random_dist(rng, d), q = random_dist(rng, d);
        double l1 = l1_distance(p, q);
        EXPECT_GE(kl(p, q), l1 * l1 / (2.0 * kLn2) - 1e-12);
    }
}

TEST(Dist, ValidatesAndRenormalizes) {
    EXPECT_THROW(Dist({0.5, 0.4}), InvalidArgument);
    EXPECT_THROW(Dist({1.2, -0.2}), InvalidArgument);
    EXPECT_THROW(Dist(std::vector<double>{}), InvalidArgument);
    Dist d({0.3 + 1e-13, 0.7});
    EXPECT_NEAR(d[0] + d[1], 1.0, 1e-16);
}

TEST(Mixture, Examples) {
    Profile one({Dist::bernoulli(0.3)}, {Dist::bernoulli(0.3)}, {1.0});
    EXPECT_NEAR(mixture(one, 0)[1], 0.3, 1e-15);
    Profile sym({Dist::bernoulli(0.2), Dist::bernoulli(0.8)}, {Dist::bernoulli(0.2), Dist::bernoulli(0.8)}, {0.5, 0.5});
    EXPECT_NEAR(mixture(sym, 0)[1], 0.5, 1e-15);
    Profile ext({Dist::bernoulli(0.0), Dist::bernoulli(1.0)}, {Dist::bernoulli(0.0), Dist::bernoulli(1.0)},
                {0.25, 0.75});
    EXPECT_NEAR(mixture(ext, 0)[1], 0.75, 1e-15);
}

TEST(Types, Enumeration) {
    auto t = enumerate_types(2, 2);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0].vec(), (std::vector<int>{2, 0}));
    EXPECT_EQ(t[1].vec(), (std::vector<int>{1, 1}));
    EXPECT_EQ(t[2].vec(), (std::vector<int>{0, 2}));
    auto z = enumerate_types(0, 3);
    ASSERT_EQ(z.size(), 1u);
    EXPECT_EQ(z[0].vec(), (std::vector<int>{0, 0, 0}));
    EXPECT_EQ(enumerate_types(10, 2).size(), 11u);
    for (int n = 0; n <= 12; ++n)
        for (std::size_t d = 1; d <= 4; ++d) {
            auto sz = enumerate_types(n, d).size();
            EXPECT_DOUBLE_EQ(static_cast<double>(sz), binomial(n + static_cast<int>(d) - 1, static_cast<int>(d) - 1));
            EXPECT_LE(static_cast<double>(sz), std::pow(n + 1.0, static_cast<double>(d)));
        }
}

TEST(Types, TypeSpaceIndex) {
    TypeSpace s(5, 3);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.index_of(s[i]), i);
    EXPECT_THROW(s.index_of(std::vector<int>{1, 1, 1}), InvalidArgument);
}

TEST(TypeClass, Examples) {
    const double p = 0.3;
    EXPECT_NEAR(type_class_log_prob(CompositeType({1, 1}), Dist::bernoulli(p)), std::log2(2 * p * (1 - p)), 1e-12);
    // Q(symbol 0) = q.
    const double q = 0.35;
    EXPECT_NEAR(type_class_log_prob(CompositeType({6, 0}), Dist({q, 1 - q})), 6 * std::log2(q), 1e-12);
    // Q = Ber(0.4): symbol 0 has probability 0.6.
    EXPECT_NEAR(type_class_log_prob(CompositeType({3, 2}), Dist::bernoulli(0.4)),
                std::log2(10 * 0.6 * 0.6 * 0.6 * 0.4 * 0.4), 1e-12);
    EXPECT_EQ(type_class_log_prob(CompositeType({1, 1}), Dist::point_mass(2, 0)), -kInf);
}

TEST(TypeClass, TotalMassIsOne) {
    std::mt19937_64 rng(3);
    for (int n = 0; n <= 12; ++n)
        for (std::size_t d = 1; d <= 3; ++d) {
            Dist q = random_dist(rng, d);
            std::vector<double> lp;
            for (const auto& u : enumerate_types(n, d)) lp.push_back(type_class_log_prob(u, q));
            EXPECT_NEAR(std::exp2(log2_sum(lp)), 1.0, 1e-9) << "n=" << n << " d=" << d;
        }
}

TEST(TypeClass, Sandwich) {
    std::mt19937_64 rng(4);
    for (int n = 1; n <= 12; ++n)
        for (std::size_t d = 2; d <= 3; ++d) {
            Dist q = random_dist(rng, d);
            for (const auto& u : enumerate_types(n, d)) {
                double lp = type_class_log_prob(u, q);
                double e = n * kl(u.as_dist(), q);
                EXPECT_LE(lp, -e + 1e-9);
                EXPECT_GE(lp, -e - static_cast<double>(d) * std::log2(n + 1.0) - 1e-9);
            }
        }
}

TEST(LogSum, HandlesInfinities) {
    std::vector<double> none = {-kInf, -kInf};
    EXPECT_EQ(log2_sum(none), -kInf);
    EXPECT_NEAR(log2_add(0.0, 0.0), 1.0, 1e-15);
    EXPECT_EQ(log2_add(-kInf, 3.0), 3.0);
    std::vector<double> big = {-2000.0, -2000.0};
    EXPECT_NEAR(log2_sum(big), -1999.0, 1e-12);
}

TEST(Apportion, LargestRemainder) {
    std::vector<double> a = {0.5, 0.5};
    EXPECT_EQ(apportion(a, 7), (std::vector<int>{4, 3}));
    std::vector<double> b = {0.2, 0.3, 0.5};
    EXPECT_EQ(apportion(b, 10), (std::vector<int>{2, 3, 5}));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        Dist w = random_dist(rng, 4);
        int n = 1 + i % 50;
        auto nu = apportion(w.values(), n);
        int s = 0;
        for (std::size_t k = 0; k < nu.size(); ++k) {
            s += nu[k];
            EXPECT_LE(std::abs(nu[k] - w[k] * n), 1.0);
        }
        EXPECT_EQ(s, n);
    }
}

TEST(Profile, Validation) {
    EXPECT_THROW(Profile({Dist::bernoulli(0.1)}, {Dist::bernoulli(0.2), Dist::bernoulli(0.3)}, {1.0}), InvalidArgument);
    EXPECT_THROW(Profile({Dist::bernoulli(0.1)}, {Dist::bernoulli(0.2)}, {0.5}), InvalidArgument);
    EXPECT_THROW(Profile({Dist::bernoulli(0.1)}, {Dist({0.2, 0.3, 0.5})}, {1.0}), InvalidArgument);
    Profile p({Dist::bernoulli(0.1), Dist::bernoulli(0.4)}, {Dist::bernoulli(0.6), Dist::bernoulli(0.9)}, {0.3, 0.7});
    EXPECT_FALSE(p.has_counts());
    EXPECT_THROW(p.n(), InvalidArgument);
    auto pn = p.at_n(10);
    EXPECT_EQ(pn.n(), 10);
    EXPECT_EQ(pn.nu()[0], 3);
    auto s = p.swapped();
    EXPECT_NEAR(s.p0()[0][1], 0.6, 1e-15);
    auto c = Profile::from_counts(p.p0(), p.p1(), {2, 6});
    EXPECT_NEAR(c.alpha()[0], 0.25, 1e-15);
}
