#pragma once

// Byzantine-attack exponents and the cluster-and-detect scheme for partial
// group information.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "anondet/error.hpp"
#include "anondet/prob.hpp"
#include "anondet/projection.hpp"

namespace anondet {

// ---------------------------------------------------------------------------
// Byzantine sensors
// ---------------------------------------------------------------------------

/// A fraction alpha of sensors reports i.i.d. fake data; the rest follow P_theta.
struct ByzantineInstance {
    Dist p0;
    Dist p1;
    double alpha = 0.0;
};

namespace detail {

inline void check_byzantine(const ByzantineInstance& inst) {
    if (inst.p0.size() != inst.p1.size() || inst.p0.size() < 2)
        throw InvalidArgument("byzantine: p0 and p1 must share an alphabet of size >= 2");
    if (!(inst.alpha >= 0.0 && inst.alpha <= 1.0)) throw InvalidArgument("byzantine: alpha outside [0,1]");
}

/// Smallest root of the nondecreasing map s -> total(s) = 1 by bisection on s.
template <class Total>
double solve_unit_total(Total&& total, double lo, double hi) {
    while (total(lo) > 1.0) lo -= 2.0 * (hi - lo) + 1.0;
    while (total(hi) < 1.0) hi += 2.0 * (hi - lo) + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        (total(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) s += std::max(0.0, a[x] - b[x]);
    return s;
}

/// argmin kl(U, P1) subject to TV(U, P0) <= r. The optimizer has the form
/// U = median(P1 2^{c-mu}, P0, P1 2^c) with c normalizing and mu >= 0 the
/// multiplier of the TV constraint.
inline std::vector<double> tv_constrained_projection(const Dist& p0, const Dist& p1, double r) {
    const std::size_t d = p0.size();
    auto shape = [&](double mu) {
        auto make = [&](double c) {
            std::vector<double> u(d);
            for (std::size_t x = 0; x < d; ++x) {
                double hi = p1[x] * std::exp2(c), lo = hi * std::exp2(-mu);
                u[x] = std::clamp(p0[x], lo, hi);
            }
            return u;
        };
        auto total = [&](double c) {
            double s = 0.0;
            for (double v : make(c)) s += v;
            return s;
        };
        return make(solve_unit_total(total, -1.0, 1.0));
    };
    auto tv_at = [&](double mu) { return total_variation(shape(mu), p0.values()); };
    double lo = 0.0, hi = 1.0;
    while (tv_at(hi) > r && hi < 4096.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        double mid = 0.5 * (lo + hi);
        (tv_at(mid) > r ? lo : hi) = mid;
    }
    return shape(hi);
}

} // namespace detail

/// Worst-case type-II exponent when the fusion center knows the Byzantine
/// fraction but not which sensors are Byzantine. Setting Q_1 = V removes the
/// attacker term, leaving (1 - alpha) min kl(U, P_1) over U reachable from
/// P_0, i.e. TV(U, P_0) <= alpha / (1 - alpha).
inline double byzantine_worst_exponent(const ByzantineInstance& inst) {
    detail::check_byzantine(inst);
    const double a = inst.alpha;
    if (a >= 1.0) return 0.0;
    if (a <= 0.0) return kl(inst.p0, inst.p1);
    const double r = a / (1.0 - a);
    if (detail::total_variation(inst.p1.values(), inst.p0.values()) <= r) return 0.0;
    double lost = 0.0;  // P_0 mass that U must drop because P_1 is zero there
    for (std::size_t x = 0; x < inst.p0.size(); ++x)
        if (inst.p1[x] <= 0.0) lost += inst.p0[x];
    if (lost > r) return kInf;
    auto u = detail::tv_constrained_projection(inst.p0, inst.p1, r);
    return (1.0 - a) * kl(Dist::normalized(u), inst.p1);
}

/// Type-II exponent when Byzantine sensors are mixed into an i.i.d. stream:
/// min kl(A, B) over A >= (1 - alpha) P_0, B >= (1 - alpha) P_1.
inline double byzantine_iid_exponent(const ByzantineInstance& inst) {
    detail::check_byzantine(inst);
    const double a = inst.alpha;
    if (a <= 0.0) return kl(inst.p0, inst.p1);
    const std::size_t d = inst.p0.size();
    std::vector<double> lo_a(d), lo_b(d);
    double joint = 0.0;
    for (std::size_t x = 0; x < d; ++x) {
        lo_a[x] = (1.0 - a) * inst.p0[x];
        lo_b[x] = (1.0 - a) * inst.p1[x];
        joint += std::max(lo_a[x], lo_b[x]);
    }
    if (joint <= 1.0 + 1e-15) return 0.0;

    if (d == 2) {
        // A(1) and B(1) range over intervals of width alpha; KL grows as the
        // two move apart, so the nearest endpoints are optimal.
        double a1 = lo_a[1], b1 = lo_b[1];
        double a_hi = a1 + a, b_hi = b1 + a;
        double ta, tb;
        if (a_hi < b1) {
            ta = a_hi;
            tb = b1;
        } else {
            ta = a1;
            tb = b_hi;
        }
        return kl(Dist::bernoulli(ta), Dist::bernoulli(tb));
    }

    // Alternating minimization over the two blocks.
    std::vector<double> A(d), B(d);
    for (std::size_t x = 0; x < d; ++x) {
        A[x] = lo_a[x] + a * inst.p0[x];
        B[x] = lo_b[x] + a * inst.p1[x];
    }
    double prev = kl(A, B);
    for (int it = 0; it < 20000; ++it) {
        // A = max(L, B 2^{-c})
        double c = detail::solve_unit_total(
            [&](double s) {
                double t = 0.0;
                for (std::size_t x = 0; x < d; ++x) t += std::max(lo_a[x], B[x] * std::exp2(s));
                return t;
            },
            -1.0, 1.0);
        for (std::size_t x = 0; x < d; ++x) A[x] = std::max(lo_a[x], B[x] * std::exp2(c));
        // B = max(M, A 2^{s})
        double s = detail::solve_unit_total(
            [&](double v) {
                double t = 0.0;
                for (std::size_t x = 0; x < d; ++x) t += std::max(lo_b[x], A[x] * std::exp2(v));
                return t;
            },
            -1.0, 1.0);
        for (std::size_t x = 0; x < d; ++x) B[x] = std::max(lo_b[x], A[x] * std::exp2(s));
        double cur = kl(A, B);
        if (prev - cur <= 1e-15 * std::max(1.0, cur)) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    return prev;
}

// ---------------------------------------------------------------------------
// Cluster-and-detect
// ---------------------------------------------------------------------------

/// assign[k] in [0, blocks) is the super-group of group k.
struct Clustering {
    std::vector<int> assign;
    int blocks = 1;
};

inline void check_clustering(const Profile& profile, const Clustering& c) {
    if (c.assign.size() != profile.groups()) throw InvalidArgument("clustering: one index per group required");
    if (c.blocks < 1) throw InvalidArgument("clustering: need at least one super-group");
    for (int b : c.assign)
        if (b < 0 || b >= c.blocks) throw InvalidArgument("clustering: super-group index out of range");
}

/// Exponent of anonymous testing inside one super-group, weighted by its mass.
inline double block_exponent(const Profile& profile, std::uint64_t members) {
    std::vector<Dist> p0, p1;
    std::vector<double> w;
    double beta = 0.0;
    for (std::size_t k = 0; k < profile.groups(); ++k) {
        if (!((members >> k) & 1u)) continue;
        p0.push_back(profile.p0()[k]);
        p1.push_back(profile.p1()[k]);
        w.push_back(profile.alpha()[k]);
        beta += profile.alpha()[k];
    }
    if (p0.empty() || beta <= 0.0) return 0.0;
    for (double& x : w) x /= beta;
    // Re-normalize exactly so the sub-profile passes the sum check.
    double s = 0.0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return beta * exponent_np(Profile(std::move(p0), std::move(p1), std::move(w)));
}

/// sum_j beta_j D_{alpha~(j)}(P_0^(j); P_1^(j)) over super-groups j.
inline double cluster_exponent(const Profile& profile, const Clustering& c) {
    check_clustering(profile, c);
    if (profile.groups() > 64) throw CapabilityError("cluster_exponent: at most 64 groups");
    std::vector<std::uint64_t> masks(c.blocks, 0);
    for (std::size_t k = 0; k < c.assign.size(); ++k) masks[c.assign[k]] |= std::uint64_t{1} << k;
    double total = 0.0;
    for (auto m : masks)
        if (m) total += block_exponent(profile, m);
    return total;
}

enum class ClusterSearch { Exhaustive, Heuristic, BudgetExhausted };

inline const char* to_string(ClusterSearch s) {
    switch (s) {
    case ClusterSearch::Exhaustive: return "exhaustive";
    case ClusterSearch::Heuristic: return "heuristic";
    case ClusterSearch::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

struct ClusteringResult {
    Clustering clustering;
    double exponent = 0.0;
    ClusterSearch status = ClusterSearch::Exhaustive;
    long evaluations = 0;
};

/// Number of partitions of K labelled groups into at most B nonempty blocks.
inline double partition_count(int K, int B) {
    // S(n, j) by the triangle recurrence, in doubles.
    std::vector<double> row(B + 1, 0.0);
    row[0] = 1.0;
    for (int n = 1; n <= K; ++n) {
        std::vector<double> next(B + 1, 0.0);
        for (int j = 1; j <= B; ++j) next[j] = j * row[j] + row[j - 1];
        row = std::move(next);
    }
    double s = 0.0;
    for (int j = 1; j <= B; ++j) s += row[j];
    return s;
}

inline constexpr double kMaxExhaustivePartitions = 1e6;

/// Best clustering of the K groups into at most 2^L super-groups.
/// Exhaustive when the partition count is at most 1e6; otherwise a sorted
/// contiguous split refined by random-restart single-move local search.
inline ClusteringResult best_clustering(const Profile& profile, int L, long budget = 20000,
                                        std::uint64_t seed = 1, int restarts = 8) {
    const int K = static_cast<int>(profile.groups());
    if (L < 0 || L > 30) throw InvalidArgument("best_clustering: L out of range");
    const int B = 1 << L;
    if (B > K) throw InvalidArgument("best_clustering: 2^L must not exceed K");
    if (K > 64) throw CapabilityError("best_clustering: at most 64 groups");

    std::map<std::uint64_t, double> memo;
    ClusteringResult best;
    best.exponent = -1.0;
    auto score = [&](const std::vector<int>& assign) {
        ++best.evaluations;
        std::vector<std::uint64_t> masks(B, 0);
        for (int k = 0; k < K; ++k) masks[assign[k]] |= std::uint64_t{1} << k;
        double total = 0.0;
        for (auto m : masks) {
            if (!m) continue;
            auto it = memo.find(m);
            if (it == memo.end()) it = memo.emplace(m, block_exponent(profile, m)).first;
            total += it->second;
        }
        return total;
    };
    auto offer = [&](const std::vector<int>& assign, double v) {
        if (v > best.exponent) {
            best.exponent = v;
            best.clustering = {assign, B};
        }
    };

    if (B == K) {
        // Singletons refine every other clustering.
        std::vector<int> assign(K);
        std::iota(assign.begin(), assign.end(), 0);
        offer(assign, score(assign));
        best.status = ClusterSearch::Exhaustive;
        return best;
    }

    if (partition_count(K, B) <= kMaxExhaustivePartitions) {
        // Restricted growth strings: a[0] = 0, a[k] <= 1 + max(a[0..k-1]).
        std::vector<int> a(K, 0);
        auto rec = [&](auto& self, int k, int used) -> void {
            if (k == K) {
                offer(a, score(a));
                return;
            }
            for (int b = 0; b <= std::min(used, B - 1); ++b) {
                a[k] = b;
                self(self, k + 1, std::max(used, b + 1));
            }
        };
        rec(rec, 1, 1);
        best.status = ClusterSearch::Exhaustive;
        return best;
    }

    // Greedy seed: sort by the informed contribution, split into B runs.
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> key(K);
    for (int k = 0; k < K; ++k) key[k] = profile.alpha()[k] * kl(profile.p0()[k], profile.p1()[k]);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return key[x] < key[y]; });
    std::vector<int> seed_assign(K);
    for (int i = 0; i < K; ++i) seed_assign[order[i]] = static_cast<int>(static_cast<long>(i) * B / K);

    std::mt19937_64 rng(seed);
    bool exhausted = false;
    auto local_search = [&](std::vector<int> assign) {
        double cur = score(assign);
        offer(assign, cur);
        bool moved = true;
        while (moved && !exhausted) {
            moved = false;
            for (int k = 0; k < K && !exhausted; ++k) {
                const int from = assign[k];
                for (int b = 0; b < B; ++b) {
                    if (b == from) continue;
                    if (best.evaluations >= budget) {
                        exhausted = true;
                        break;
                    }
                    assign[k] = b;
                    double v = score(assign);
                    if (v > cur + 1e-12) {
                        cur = v;
                        offer(assign, cur);
                        moved = true;
                        break;
                    }
                    assign[k] = from;
                }
            }
        }
    };
    local_search(seed_assign);
    std::uniform_int_distribution<int> pick(0, B - 1);
    for (int r = 0; r < restarts && !exhausted; ++r) {
        std::vector<int> start(K);
        for (int& b : start) b = pick(rng);
        local_search(start);
    }
    best.status = exhausted ? ClusterSearch::BudgetExhausted : ClusterSearch::Heuristic;
    return best;
}

/// Singleton groups: every group is its own super-group (informed testing).
inline Clustering singleton_clustering(std::size_t K) {
    Clustering c;
    c.blocks = static_cast<int>(K);
    for (std::size_t k = 0; k < K; ++k) c.assign.push_back(static_cast<int>(k));
    return c;
}

/// Partial-information construction: theta_k = k / (K + 1), P_{0;k} = Ber(theta_k),
/// P_{1;k} = Ber(1 - theta_k), uniform alpha.
inline Profile partial_info_profile(int K) {
    if (K < 1) throw InvalidArgument("partial_info_profile: K must be positive");
    std::vector<Dist> p0, p1;
    std::vector<double> alpha(K, 1.0 / K);
    for (int k = 1; k <= K; ++k) {
        double theta = static_cast<double>(k) / (K + 1);
        p0.push_back(Dist::bernoulli(theta));
        p1.push_back(Dist::bernoulli(1.0 - theta));
    }
    return Profile(std::move(p0), std::move(p1), std::move(alpha));
}

} // namespace anondet
