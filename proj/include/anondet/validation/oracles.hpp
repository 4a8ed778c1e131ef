#pragma once

// Brute-force reference computations. Each one avoids the algorithm it is
// used to check: orbit measures by enumerating sequences and labelings,
// projections by grid search, the packing radius by bisection on ball
// disjointness, Byzantine exponents by nested grids.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "anondet/applications.hpp"
#include "anondet/exact.hpp"
#include "anondet/prob.hpp"
#include "anondet/projection.hpp"

namespace anondet::oracle {

/// P_{theta;sigma}(x) for one labeling, in the linear domain.
inline double sequence_prob(const Profile& profile, int theta, std::span<const int> sigma, std::span<const int> x) {
    double p = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) p *= profile.p(theta)[sigma[i]][x[i]];
    return p;
}

/// Distribution of the type of X^n under P_{theta;sigma}, by enumerating X^n.
inline std::vector<double> type_distribution(const Profile& profile, int theta, std::span<const int> sigma,
                                             const TypeSpace& space) {
    const int n = profile.n();
    const std::size_t d = profile.alphabet_size();
    std::vector<double> out(space.size(), 0.0);
    const std::uint64_t count = sequence_count(n, d);
    for (std::uint64_t code = 0; code < count; ++code) {
        auto x = decode_sequence(code, n, d);
        out[space.index_of(type_of(x, d))] += sequence_prob(profile, theta, sigma, x);
    }
    return out;
}

/// A fixed sequence of type V: symbol 0 repeated V_0 times, then symbol 1, ...
inline std::vector<int> representative(const CompositeType& v) {
    std::vector<int> x;
    for (std::size_t a = 0; a < v.size(); ++a) x.insert(x.end(), v[a], static_cast<int>(a));
    return x;
}

/// sum_sigma P_{1;sigma}(x) / sum_sigma P_{0;sigma}(x) for a sequence of type V.
inline double mixture_ratio(const CompositeType& v, const Profile& profile) {
    auto x = representative(v);
    double num = 0.0, den = 0.0;
    for (const auto& s : enumerate_labelings(profile.nu())) {
        num += sequence_prob(profile, 1, s, x);
        den += sequence_prob(profile, 0, s, x);
    }
    return num / den;
}

/// max_sigma P_{1;sigma}(x) / max_sigma P_{0;sigma}(x) for a sequence of type V.
inline double max_ratio(const CompositeType& v, const Profile& profile) {
    auto x = representative(v);
    double num = 0.0, den = 0.0;
    for (const auto& s : enumerate_labelings(profile.nu())) {
        num = std::max(num, sequence_prob(profile, 1, s, x));
        den = std::max(den, sequence_prob(profile, 0, s, x));
    }
    return num / den;
}

/// Threshold and randomization of a level-epsilon threshold test, from a
/// cumulative scan over the distinct statistic values (linear domain).
struct ScanThreshold {
    double tau = 0.0;
    double gamma = 0.0;
};

inline ScanThreshold scan_threshold(std::span<const double> stat, std::span<const double> p0, double epsilon,
                                    double rel_tol = 1e-9) {
    std::vector<double> levels;
    for (std::size_t i = 0; i < stat.size(); ++i)
        if (p0[i] > 0.0 || std::isfinite(stat[i])) levels.push_back(stat[i]);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    auto same = [&](double a, double b) {
        if (a == b) return true;
        return std::isfinite(a) && std::isfinite(b) &&
               std::abs(a - b) <= rel_tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    };
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i > 0 && same(levels[i], levels[i - 1])) continue;
        double above = 0.0, at = 0.0;
        for (std::size_t j = 0; j < stat.size(); ++j) {
            if (same(stat[j], levels[i])) at += p0[j];
            else if (stat[j] > levels[i]) above += p0[j];
        }
        if (above + at > epsilon) return {levels[i], (epsilon - above) / at};
    }
    return {-kInf, 1.0};
}

// ---------------------------------------------------------------------------
// Projections on a binary alphabet
// ---------------------------------------------------------------------------

/// D(Ber(u) || Ber(q)) in bits, written out directly.
inline double bernoulli_kl(double u, double q) {
    auto term = [](double a, double b) {
        if (a <= 0.0) return 0.0;
        if (b <= 0.0) return kInf;
        return a * std::log2(a / b);
    };
    return std::max(0.0, term(u, q) + term(1.0 - u, 1.0 - q));
}

/// Minimizes a convex function on [lo, hi] by golden-section search.
template <class F>
double golden_min(F&& f, double lo, double hi, int iters = 80) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    return std::min({fc, fd, f(lo), f(hi)});
}

/// f_Q(T) for d = 2 and K <= 3 by grid search over the per-group parameters
/// u_k = U_k(1). K = 2 scans u_1 on the given step; K = 3 scans u_1 and
/// minimizes over u_2 by golden section (the inner minimum is convex).
inline double grid_projection(double t, std::span<const Dist> q, std::span<const double> alpha, double step = 1e-5) {
    const std::size_t K = q.size();
    auto term = [&](std::size_t k, double u) { return alpha[k] > 0.0 ? alpha[k] * bernoulli_kl(u, q[k][1]) : 0.0; };
    if (K == 1) return bernoulli_kl(t, q[0][1]);
    const long steps = std::lround(1.0 / step);
    double best = kInf;
    if (K == 2) {
        for (long i = 0; i <= steps; ++i) {
            double u1 = static_cast<double>(i) / steps;
            double u2 = (t - alpha[0] * u1) / alpha[1];
            if (u2 < -1e-12 || u2 > 1.0 + 1e-12) continue;
            best = std::min(best, term(0, u1) + term(1, std::clamp(u2, 0.0, 1.0)));
        }
        return best;
    }
    if (K == 3) {
        for (long i = 0; i <= steps; ++i) {
            double u1 = static_cast<double>(i) / steps;
            double rest = t - alpha[0] * u1;  // = alpha_2 u_2 + alpha_3 u_3
            double lo = std::max(0.0, (rest - alpha[2]) / alpha[1]);
            double hi = std::min(1.0, rest / alpha[1]);
            if (lo > hi + 1e-12) continue;
            hi = std::max(lo, hi);
            double head = term(0, u1);
            if (head == kInf) continue;
            auto inner = [&](double u2) {
                double u3 = std::clamp((rest - alpha[1] * u2) / alpha[2], 0.0, 1.0);
                return term(1, u2) + term(2, u3);
            };
            best = std::min(best, head + golden_min(inner, lo, hi, 50));
        }
        return best;
    }
    throw InvalidArgument("grid_projection: K must be 1, 2 or 3");
}

// ---------------------------------------------------------------------------
// Chernoff quantities
// ---------------------------------------------------------------------------

/// Largest r with disjoint sublevel sets {f_P0 < r} and {f_P1 < r} on a binary
/// alphabet, by bisection on r. Each sublevel set is an interval around its
/// mixture, located by bisection on T(1).
inline double packing_radius_bisection(const Profile& profile) {
    auto f = [&](int theta, double s) {
        return f_value(Dist::bernoulli(s), profile.p(theta), profile.alpha());
    };
    const double m0 = mixture(profile, 0)[1], m1 = mixture(profile, 1)[1];
    auto edge = [&](int theta, double centre, double r, double toward) {
        // Furthest point from centre toward `toward` with f_theta < r.
        if (f(theta, toward) < r) return toward;
        double in = centre, out = toward;
        for (int i = 0; i < 80; ++i) {
            double mid = 0.5 * (in + out);
            (f(theta, mid) < r ? in : out) = mid;
        }
        return in;
    };
    if (std::abs(m0 - m1) < 1e-15) return 0.0;
    const double dir0 = m1 > m0 ? 1.0 : 0.0, dir1 = m1 > m0 ? 0.0 : 1.0;
    auto disjoint = [&](double r) {
        double e0 = edge(0, m0, r, dir0), e1 = edge(1, m1, r, dir1);
        return m1 > m0 ? e0 < e1 : e0 > e1;
    };
    double lo = 0.0, hi = 1.0;
    while (disjoint(hi) && hi < 1e3) hi *= 2.0;
    if (disjoint(hi)) return kInf;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (disjoint(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Classical Chernoff information max_s -log2 sum_x P0^{1-s} P1^s on a grid
/// of s refined by golden section.
inline double chernoff_information(const Dist& p0, const Dist& p1) {
    auto neg = [&](double s) {
        double z = 0.0;
        for (std::size_t x = 0; x < p0.size(); ++x)
            if (p0[x] > 0.0 && p1[x] > 0.0) z += std::pow(p0[x], 1.0 - s) * std::pow(p1[x], s);
        return std::log2(z);
    };
    double best_s = 0.0, best = kInf;
    for (int i = 0; i <= 1000; ++i) {
        double s = i / 1000.0, v = neg(s);
        if (v < best) {
            best = v;
            best_s = s;
        }
    }
    return -golden_min(neg, std::max(0.0, best_s - 1e-3), std::min(1.0, best_s + 1e-3), 80);
}

// ---------------------------------------------------------------------------
// Byzantine exponents on a binary alphabet
// ---------------------------------------------------------------------------

/// Unreduced worst-case problem: grid over Q_0 = Ber(q0); for each, the
/// projection of T = (1-a)P_0 + a Q_0 onto (P_1, Q_1) minimized over Q_1.
inline double byzantine_worst_grid(const ByzantineInstance& inst, double step = 1e-3) {
    const double a = inst.alpha;
    if (a <= 0.0) return kl(inst.p0, inst.p1);
    if (a >= 1.0) return 0.0;
    const std::vector<double> w{1.0 - a, a};
    double best = kInf;
    const long steps = std::lround(1.0 / step);
    for (long i = 0; i <= steps; ++i) {
        double q0 = static_cast<double>(i) / steps;
        double t = (1.0 - a) * inst.p0[1] + a * q0;
        auto over_q1 = [&](double q1) {
            std::vector<Dist> q{inst.p1, Dist::bernoulli(q1)};
            return f_value(Dist::bernoulli(t), q, w);
        };
        best = std::min(best, golden_min(over_q1, 0.0, 1.0, 40));
    }
    return best;
}

/// 2-D grid over (Q_0, Q_1) of kl((1-a)P_0 + a Q_0 || (1-a)P_1 + a Q_1).
inline double byzantine_iid_grid(const ByzantineInstance& inst, double step = 1e-3) {
    const double a = inst.alpha;
    const long steps = std::lround(1.0 / step);
    double best = kInf;
    for (long i = 0; i <= steps; ++i) {
        double ta = (1.0 - a) * inst.p0[1] + a * static_cast<double>(i) / steps;
        for (long j = 0; j <= steps; ++j) {
            double tb = (1.0 - a) * inst.p1[1] + a * static_cast<double>(j) / steps;
            best = std::min(best, bernoulli_kl(ta, tb));
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

/// Best cluster exponent over all B^K labelled assignments.
inline double best_clustering_exhaustive(const Profile& profile, int blocks) {
    const std::size_t K = profile.groups();
    Clustering c;
    c.blocks = blocks;
    c.assign.assign(K, 0);
    double best = -kInf;
    for (;;) {
        best = std::max(best, cluster_exponent(profile, c));
        std::size_t k = 0;
        while (k < K && ++c.assign[k] == blocks) c.assign[k++] = 0;
        if (k == K) break;
    }
    return best;
}

} // namespace anondet::oracle
