#pragma once

// Exact finite-n machinery for the anonymous composite test: orbit measures of
// type classes, the mixture and generalized likelihood ratios, Neyman-Pearson
// calibration and exact worst-case error probabilities.
//
// For a symmetric test the worst case over labelings sigma is attained by every
// sigma, because P_{theta;sigma} pushed through the type map does not depend on
// sigma. All sums over labelings therefore reduce to sums over allocation
// matrices C (d x K, row sums = symbol counts, column sums = group sizes).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "anondet/prob.hpp"

namespace anondet {

namespace detail {

/// Calls fn(c) for every split of m into K parts with c_k <= cap_k.
template <class Fn>
void for_each_bounded_split(int m, std::span<const int> cap, Fn&& fn) {
    const std::size_t K = cap.size();
    std::vector<int> c(K, 0);
    std::vector<int> suffix(K + 1, 0);
    for (std::size_t k = K; k-- > 0;) suffix[k] = suffix[k + 1] + cap[k];
    if (m > suffix[0]) return;
    auto rec = [&](auto& self, std::size_t k, int left) -> void {
        if (k + 1 == K) {
            if (left <= cap[k]) {
                c[k] = left;
                fn(std::as_const(c));
            }
            return;
        }
        int lo = std::max(0, left - suffix[k + 1]);
        int hi = std::min(cap[k], left);
        for (int v = lo; v <= hi; ++v) {
            c[k] = v;
            self(self, k + 1, left - v);
        }
    };
    rec(rec, 0, m);
}

inline double log2_prob(double p) { return p > 0.0 ? std::log2(p) : -kInf; }

/// Weight of placing c_k copies of symbol a in each group k:
///   sum_k c_k log2 P_k(a)  (- sum_k log2 c_k!  when with_factorials).
inline double split_weight(std::span<const int> c, const std::vector<Dist>& p, std::size_t a,
                           bool with_factorials) {
    double w = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] == 0) continue;
        if (p[k][a] <= 0.0) return -kInf;
        w += c[k] * std::log2(p[k][a]);
        if (with_factorials) w -= log2_factorial(c[k]);
    }
    return w;
}

enum class Reduce { Sum, Max };

/// Dynamic program over remaining column capacities, one symbol at a time.
/// Sum mode returns log2 sum_C prod_k [prod_a P_k(a)^{C_ak} / C_ak!];
/// Max mode returns max_C sum_{a,k} C_ak log2 P_k(a).
inline double capacity_dp(const CompositeType& v, std::span<const int> nu, const std::vector<Dist>& p,
                          Reduce mode) {
    const std::size_t d = v.size();
    std::map<std::vector<int>, double> layer;
    layer.emplace(std::vector<int>(nu.begin(), nu.end()), 0.0);
    for (std::size_t a = 0; a < d; ++a) {
        std::map<std::vector<int>, double> next;
        for (const auto& [cap, acc] : layer) {
            if (acc == -kInf) continue;
            for_each_bounded_split(v[a], cap, [&](const std::vector<int>& c) {
                double w = split_weight(c, p, a, mode == Reduce::Sum);
                if (w == -kInf) return;
                std::vector<int> rest = cap;
                for (std::size_t k = 0; k < rest.size(); ++k) rest[k] -= c[k];
                auto [it, fresh] = next.emplace(std::move(rest), acc + w);
                if (!fresh)
                    it->second = mode == Reduce::Sum ? log2_add(it->second, acc + w) : std::max(it->second, acc + w);
            });
        }
        layer = std::move(next);
    }
    auto it = layer.find(std::vector<int>(nu.size(), 0));
    return it == layer.end() ? -kInf : it->second;
}

/// Number of allocation matrices with the given margins (as a double).
inline double count_allocations(const CompositeType& v, std::span<const int> nu) {
    std::map<std::vector<int>, double> layer;
    layer.emplace(std::vector<int>(nu.begin(), nu.end()), 1.0);
    for (std::size_t a = 0; a < v.size(); ++a) {
        std::map<std::vector<int>, double> next;
        for (const auto& [cap, cnt] : layer) {
            for_each_bounded_split(v[a], cap, [&](const std::vector<int>& c) {
                std::vector<int> rest = cap;
                for (std::size_t k = 0; k < rest.size(); ++k) rest[k] -= c[k];
                next[std::move(rest)] += cnt;
            });
        }
        layer = std::move(next);
    }
    auto it = layer.find(std::vector<int>(nu.size(), 0));
    return it == layer.end() ? 0.0 : it->second;
}

inline void check_type_against_profile(const CompositeType& v, const Profile& profile) {
    if (v.size() != profile.alphabet_size()) throw InvalidArgument("type and profile alphabets differ");
    if (v.n() != profile.n()) throw InvalidArgument("type length differs from sum of group sizes");
}

/// Per-type table over P_n of one group, combined across groups by
/// (log-sum or max) convolution of count vectors.
inline std::vector<double> convolve_groups(const Profile& profile, int theta, const TypeSpace& space, Reduce mode) {
    const std::size_t d = profile.alphabet_size();
    const auto& p = profile.p(theta);
    auto nu = profile.nu();
    // acc holds a sparse map from count vector to log2 weight.
    std::map<std::vector<int>, double> acc;
    acc.emplace(std::vector<int>(d, 0), 0.0);
    for (std::size_t k = 0; k < nu.size(); ++k) {
        if (nu[k] == 0) continue;
        std::vector<std::pair<std::vector<int>, double>> group;
        for_each_composition(nu[k], d, [&](const std::vector<int>& c) {
            CompositeType u(c);
            double w = 0.0;
            if (mode == Reduce::Sum) {
                w = type_class_log_prob(u, p[k]);
            } else {
                for (std::size_t a = 0; a < d; ++a) {
                    if (c[a] == 0) continue;
                    if (p[k][a] <= 0.0) {
                        w = -kInf;
                        break;
                    }
                    w += c[a] * std::log2(p[k][a]);
                }
            }
            if (w != -kInf) group.emplace_back(c, w);
        });
        std::map<std::vector<int>, double> next;
        for (const auto& [ca, wa] : acc) {
            for (const auto& [cb, wb] : group) {
                std::vector<int> s(d);
                for (std::size_t a = 0; a < d; ++a) s[a] = ca[a] + cb[a];
                auto [it, fresh] = next.emplace(std::move(s), wa + wb);
                if (!fresh)
                    it->second =
                        mode == Reduce::Sum ? log2_add(it->second, wa + wb) : std::max(it->second, wa + wb);
            }
        }
        acc = std::move(next);
    }
    std::vector<double> out(space.size(), -kInf);
    for (const auto& [c, w] : acc) out[space.index_of(c)] = w;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Orbit measures
// ---------------------------------------------------------------------------

/// log2 P~_theta{V}: probability that a sequence drawn from P_{theta;sigma}
/// has type V (identical for every sigma). -inf if V is infeasible.
inline double symmetrized_log_measure(int theta, const CompositeType& v, const Profile& profile) {
    detail::check_type_against_profile(v, profile);
    auto nu = profile.nu();
    double core = detail::capacity_dp(v, nu, profile.p(theta), detail::Reduce::Sum);
    if (core == -kInf) return -kInf;
    double fact = 0.0;
    for (int c : nu) fact += log2_factorial(c);
    return core + fact;
}

/// Orbit measures of every type in P_n under both hypotheses.
struct OrbitTables {
    std::shared_ptr<const TypeSpace> space;
    std::vector<double> log_p0; ///< log2 P~_0{V}, aligned with *space
    std::vector<double> log_p1; ///< log2 P~_1{V}

    const std::vector<double>& log_p(int theta) const { return theta == 0 ? log_p0 : log_p1; }
};

/// Bulk route: convolves the per-group multinomial type distributions.
inline OrbitTables orbit_tables(const Profile& profile) {
    auto space = std::make_shared<const TypeSpace>(profile.n(), profile.alphabet_size());
    OrbitTables t{space, {}, {}};
    t.log_p0 = detail::convolve_groups(profile, 0, *space, detail::Reduce::Sum);
    t.log_p1 = detail::convolve_groups(profile, 1, *space, detail::Reduce::Sum);
    return t;
}

// ---------------------------------------------------------------------------
// Likelihood ratios
// ---------------------------------------------------------------------------

inline double log_ratio_or_throw(double l1, double l0, const char* what) {
    if (l1 == -kInf && l0 == -kInf) throw UndefinedRatio(std::string(what) + ": both hypotheses give zero mass");
    if (l0 == -kInf) return kInf;
    if (l1 == -kInf) return -kInf;
    return l1 - l0;
}

/// log2 of the mixture likelihood ratio sum_sigma P_{1;sigma}(x) / sum_sigma P_{0;sigma}(x)
/// for any x of type V.
inline double log_mlr(const CompositeType& v, const Profile& profile) {
    return log_ratio_or_throw(symmetrized_log_measure(1, v, profile), symmetrized_log_measure(0, v, profile), "mlr");
}

inline double mlr(const CompositeType& v, const Profile& profile) { return std::exp2(log_mlr(v, profile)); }

inline constexpr double kMaxExhaustiveAllocations = 1e6;

/// log2 max_sigma P_{theta;sigma}(x) for x of type V. Enumerates allocation
/// matrices when there are at most 1e6 of them, otherwise runs the exact
/// max-plus capacity DP.
inline double glrt_log_max(int theta, const CompositeType& v, const Profile& profile) {
    detail::check_type_against_profile(v, profile);
    auto nu = profile.nu();
    const auto& p = profile.p(theta);
    if (detail::count_allocations(v, nu) > kMaxExhaustiveAllocations)
        return detail::capacity_dp(v, nu, p, detail::Reduce::Max);

    const std::size_t d = v.size();
    double best = -kInf;
    std::vector<int> cap(nu.begin(), nu.end());
    auto rec = [&](auto& self, std::size_t a, double acc) -> void {
        if (a == d) {
            best = std::max(best, acc);
            return;
        }
        detail::for_each_bounded_split(v[a], cap, [&](const std::vector<int>& c) {
            double w = detail::split_weight(c, p, a, false);
            if (w == -kInf) return;
            for (std::size_t k = 0; k < c.size(); ++k) cap[k] -= c[k];
            self(self, a + 1, acc + w);
            for (std::size_t k = 0; k < c.size(); ++k) cap[k] += c[k];
        });
    };
    rec(rec, 0, 0.0);
    return best;
}

inline double log_glrt(const CompositeType& v, const Profile& profile) {
    return log_ratio_or_throw(glrt_log_max(1, v, profile), glrt_log_max(0, v, profile), "glrt");
}

inline double glrt(const CompositeType& v, const Profile& profile) { return std::exp2(log_glrt(v, profile)); }

// ---------------------------------------------------------------------------
// Symmetric tests
// ---------------------------------------------------------------------------

/// A symmetric test phi = phi~ o Pi, stored as one acceptance value per type.
/// log2_tau and gamma are set for threshold tests and NaN otherwise.
struct TestTable {
    std::shared_ptr<const TypeSpace> space;
    std::vector<double> phi;
    double log2_tau = std::numeric_limits<double>::quiet_NaN();
    double gamma = std::numeric_limits<double>::quiet_NaN();

    double value(const CompositeType& v) const { return phi.at(space->index_of(v)); }
};

inline TestTable constant_test(std::shared_ptr<const TypeSpace> space, double value) {
    if (!(value >= 0.0 && value <= 1.0)) throw InvalidArgument("constant_test: value outside [0,1]");
    TestTable t;
    t.phi.assign(space->size(), value);
    t.space = std::move(space);
    return t;
}

/// Builds a deterministic table from decide(type) in {0,1}.
template <class Decide>
TestTable decision_table(std::shared_ptr<const TypeSpace> space, Decide&& decide) {
    TestTable t;
    t.phi.resize(space->size());
    for (std::size_t i = 0; i < space->size(); ++i) t.phi[i] = decide((*space)[i]) ? 1.0 : 0.0;
    t.space = std::move(space);
    return t;
}

inline constexpr double kTieTolerance = 1e-9;

/// Randomized threshold test on a per-type statistic (log2 domain): accept H1
/// when stat > tau, with probability gamma when stat == tau, and set (tau,
/// gamma) so that the H0 mass of the acceptance region equals epsilon.
/// Types with zero mass under both hypotheses get phi = 0. Ties (within
/// 1e-9 relative) share one gamma.
inline TestTable calibrate_threshold(std::shared_ptr<const TypeSpace> space, std::span<const double> log_stat,
                                     std::span<const double> log_p0, std::span<const double> log_p1,
                                     double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("calibrate: epsilon must lie in (0,1)");
    const std::size_t m = space->size();
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < m; ++i)
        if (log_p0[i] > -kInf || log_p1[i] > -kInf) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return log_stat[a] > log_stat[b]; });

    auto tied = [](double a, double b) {
        if (a == b) return true;
        if (!std::isfinite(a) || !std::isfinite(b)) return false;
        return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    };

    TestTable t;
    t.phi.assign(m, 0.0);
    double mass_above = 0.0;
    std::size_t i = 0;
    bool placed = false;
    while (i < order.size()) {
        std::size_t j = i;
        double group_mass = 0.0;
        while (j < order.size() && tied(log_stat[order[j]], log_stat[order[i]])) {
            group_mass += std::exp2(log_p0[order[j]]);
            ++j;
        }
        if (mass_above + group_mass > epsilon) {
            t.log2_tau = log_stat[order[i]];
            t.gamma = (epsilon - mass_above) / group_mass;
            for (std::size_t q = i; q < j; ++q) t.phi[order[q]] = t.gamma;
            placed = true;
            break;
        }
        for (std::size_t q = i; q < j; ++q) t.phi[order[q]] = 1.0;
        mass_above += group_mass;
        i = j;
    }
    if (!placed) {
        t.log2_tau = -kInf;
        t.gamma = 1.0;
    }
    t.space = std::move(space);
    return t;
}

inline std::vector<double> log_mlr_table(const OrbitTables& orb) {
    std::vector<double> s(orb.space->size(), -kInf);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (orb.log_p0[i] == -kInf && orb.log_p1[i] == -kInf) continue;
        s[i] = log_ratio_or_throw(orb.log_p1[i], orb.log_p0[i], "mlr");
    }
    return s;
}

/// Bulk log2 GLRT statistic via max-plus convolution over groups.
inline std::vector<double> log_glrt_table(const Profile& profile, const TypeSpace& space) {
    auto m1 = detail::convolve_groups(profile, 1, space, detail::Reduce::Max);
    auto m0 = detail::convolve_groups(profile, 0, space, detail::Reduce::Max);
    std::vector<double> s(space.size(), -kInf);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (m0[i] == -kInf && m1[i] == -kInf) continue;
        s[i] = log_ratio_or_throw(m1[i], m0[i], "glrt");
    }
    return s;
}

/// The optimal (mixture likelihood ratio) test at worst-case type-I level epsilon.
inline TestTable calibrate_np(const OrbitTables& orb, double epsilon) {
    auto stat = log_mlr_table(orb);
    return calibrate_threshold(orb.space, stat, orb.log_p0, orb.log_p1, epsilon);
}

inline TestTable calibrate_np(const Profile& profile, double epsilon) {
    return calibrate_np(orbit_tables(profile), epsilon);
}

/// Randomized GLRT calibrated to the same worst-case type-I level.
inline TestTable calibrate_glrt(const Profile& profile, const OrbitTables& orb, double epsilon) {
    auto stat = log_glrt_table(profile, *orb.space);
    return calibrate_threshold(orb.space, stat, orb.log_p0, orb.log_p1, epsilon);
}

inline TestTable calibrate_glrt(const Profile& profile, double epsilon) {
    return calibrate_glrt(profile, orbit_tables(profile), epsilon);
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ErrorPoint {
    double pf = 0.0;
    double pm = 0.0;
    double log2_pf = -kInf;
    double log2_pm = -kInf;
};

inline ErrorPoint exact_errors(const TestTable& test, const OrbitTables& orb) {
    if (test.phi.size() != orb.space->size()) throw InvalidArgument("exact_errors: table does not cover P_n");
    std::vector<double> f, m;
    for (std::size_t i = 0; i < test.phi.size(); ++i) {
        double phi = test.phi[i];
        if (!(phi >= 0.0 && phi <= 1.0)) throw InvalidArgument("exact_errors: acceptance value outside [0,1]");
        if (phi > 0.0) f.push_back(orb.log_p0[i] + std::log2(phi));
        if (phi < 1.0) m.push_back(orb.log_p1[i] + std::log2(1.0 - phi));
    }
    ErrorPoint e;
    e.log2_pf = f.empty() ? -kInf : log2_sum(f);
    e.log2_pm = m.empty() ? -kInf : log2_sum(m);
    e.pf = std::min(1.0, std::exp2(e.log2_pf));
    e.pm = std::min(1.0, std::exp2(e.log2_pm));
    return e;
}

inline ErrorPoint exact_errors(const TestTable& test, const Profile& profile) {
    return exact_errors(test, orbit_tables(profile));
}

/// beta^(n)(epsilon, nu): the minimum worst-case type-II error at level epsilon.
inline double beta_star(const Profile& profile, double epsilon) {
    auto orb = orbit_tables(profile);
    return exact_errors(calibrate_np(orb, epsilon), orb).pm;
}

inline double log2_beta_star(const OrbitTables& orb, double epsilon) {
    return exact_errors(calibrate_np(orb, epsilon), orb).log2_pm;
}

// ---------------------------------------------------------------------------
// Hoeffding-style test
// ---------------------------------------------------------------------------

/// 1 iff D(V/n || M_0(alpha)) > delta.
inline int hoeffding_test(const CompositeType& v, const Profile& profile, double delta) {
    if (!(delta >= 0.0)) throw InvalidArgument("hoeffding_test: delta must be nonnegative");
    return kl(v.as_dist(), mixture(profile, 0)) > delta ? 1 : 0;
}

inline TestTable hoeffding_table(const Profile& profile, double delta) {
    auto space = std::make_shared<const TypeSpace>(profile.n(), profile.alphabet_size());
    return decision_table(space, [&](const CompositeType& v) { return hoeffding_test(v, profile, delta) == 1; });
}

// ---------------------------------------------------------------------------
// Tests on raw sequences
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kMaxSequences = 1u << 20;

/// An arbitrary (possibly non-symmetric) test on X^n. psi is indexed by the
/// base-d code of the sequence with x_1 as the most significant digit.
struct SequenceTest {
    int n = 0;
    std::size_t d = 2;
    std::vector<double> psi;
};

inline std::uint64_t sequence_count(int n, std::size_t d) {
    std::uint64_t c = 1;
    for (int i = 0; i < n; ++i) {
        c *= d;
        if (c > kMaxSequences) throw CapabilityError("sequence enumeration too large: d^n exceeds 2^20");
    }
    return c;
}

inline std::vector<int> decode_sequence(std::uint64_t code, int n, std::size_t d) {
    std::vector<int> x(n);
    for (int i = n - 1; i >= 0; --i) {
        x[i] = static_cast<int>(code % d);
        code /= d;
    }
    return x;
}

inline CompositeType type_of(std::span<const int> x, std::size_t d) {
    std::vector<int> c(d, 0);
    for (int s : x) c.at(static_cast<std::size_t>(s)) += 1;
    return CompositeType(std::move(c));
}

/// Permutation average of psi: phi~(V) = mean of psi over the type class of V.
inline TestTable symmetrize(const SequenceTest& test, const Profile& profile) {
    if (test.n != profile.n() || test.d != profile.alphabet_size())
        throw InvalidArgument("symmetrize: test does not match profile");
    const std::uint64_t count = sequence_count(test.n, test.d);
    if (test.psi.size() != count) throw InvalidArgument("symmetrize: psi must cover X^n");
    auto space = std::make_shared<const TypeSpace>(test.n, test.d);
    std::vector<double> sum(space->size(), 0.0);
    std::vector<double> members(space->size(), 0.0);
    for (std::uint64_t code = 0; code < count; ++code) {
        auto x = decode_sequence(code, test.n, test.d);
        std::size_t idx = space->index_of(type_of(x, test.d));
        sum[idx] += test.psi[code];
        members[idx] += 1.0;
    }
    TestTable t;
    t.phi.resize(space->size());
    for (std::size_t i = 0; i < sum.size(); ++i) t.phi[i] = std::clamp(sum[i] / members[i], 0.0, 1.0);
    t.space = std::move(space);
    return t;
}

/// Every labeling in S_{n,nu}, as the group index of each sensor.
inline std::vector<std::vector<int>> enumerate_labelings(std::span<const int> nu) {
    std::vector<int> labels;
    for (std::size_t k = 0; k < nu.size(); ++k) labels.insert(labels.end(), nu[k], static_cast<int>(k));
    std::vector<std::vector<int>> out;
    do {
        out.push_back(labels);
    } while (std::next_permutation(labels.begin(), labels.end()));
    return out;
}

inline constexpr double kMaxWorstCaseWork = 5e7;

/// Worst-case (pf, pm) of an arbitrary sequence test by explicit enumeration
/// of X^n and S_{n,nu}.
inline ErrorPoint worst_case_errors(const SequenceTest& test, const Profile& profile) {
    if (test.n != profile.n() || test.d != profile.alphabet_size())
        throw InvalidArgument("worst_case_errors: test does not match profile");
    const std::uint64_t count = sequence_count(test.n, test.d);
    if (test.psi.size() != count) throw InvalidArgument("worst_case_errors: psi must cover X^n");
    auto nu = profile.nu();
    double labelings = std::exp2(log2_multinomial(nu));
    if (labelings * static_cast<double>(count) > kMaxWorstCaseWork)
        throw CapabilityError("worst_case_errors: |X^n| * |S_{n,nu}| exceeds 5e7");
    auto sigmas = enumerate_labelings(nu);
    ErrorPoint e;
    for (const auto& sigma : sigmas) {
        double f = 0.0, m = 0.0;
        for (std::uint64_t code = 0; code < count; ++code) {
            auto x = decode_sequence(code, test.n, test.d);
            double p0 = 1.0, p1 = 1.0;
            for (int i = 0; i < test.n; ++i) {
                p0 *= profile.p0()[sigma[i]][x[i]];
                p1 *= profile.p1()[sigma[i]][x[i]];
            }
            f += p0 * test.psi[code];
            m += p1 * (1.0 - test.psi[code]);
        }
        e.pf = std::max(e.pf, f);
        e.pm = std::max(e.pm, m);
    }
    e.log2_pf = e.pf > 0.0 ? std::log2(e.pf) : -kInf;
    e.log2_pm = e.pm > 0.0 ? std::log2(e.pm) : -kInf;
    return e;
}

} // namespace anondet
