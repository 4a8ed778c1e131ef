#pragma once

// Bayesian (Chernoff) regime: the efficient test phi_eff, the packing radius
// r* = min_T max(f_{P0}(T), f_{P1}(T)), the phi_lambda family and the
// boundary (E_0(lambda), E_1(lambda)) of the exponent region.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anondet/error.hpp"
#include "anondet/exact.hpp"
#include "anondet/parallel.hpp"
#include "anondet/prob.hpp"
#include "anondet/projection.hpp"

namespace anondet {

inline constexpr double kDecisionTolerance = 1e-9;

struct FPair {
    double f0 = kInf;
    double f1 = kInf;
};

inline FPair f_pair(const Dist& t, const Profile& profile) {
    return {f_value(t, profile.p0(), profile.alpha()), f_value(t, profile.p1(), profile.alpha())};
}

/// Extended-real test of f0 - f1 >= lambda (ties within 1e-9 decide 1).
inline bool difference_at_least(double f0, double f1, double lambda) {
    if (f0 == kInf && f1 == kInf) throw UndefinedComparison("f_P0 and f_P1 are both infinite");
    if (lambda == -kInf || f0 == kInf) return true;
    if (f1 == kInf) return false;
    return f0 - f1 >= lambda - kDecisionTolerance;
}

/// phi_lambda(V) = 1{f_P0(V/n) - f_P1(V/n) >= lambda}.
inline int phi_lambda(const CompositeType& v, const Profile& profile, double lambda) {
    auto f = f_pair(v.as_dist(), profile);
    return difference_at_least(f.f0, f.f1, lambda) ? 1 : 0;
}

/// 0 if f_P1(V/n) > f_P0(V/n), else 1.
inline int phi_eff(const CompositeType& v, const Profile& profile) { return phi_lambda(v, profile, 0.0); }

/// f_P0 and f_P1 at every type of P_n, for building many phi_lambda tables.
struct DivergenceTable {
    std::shared_ptr<const TypeSpace> space;
    std::vector<double> f0;
    std::vector<double> f1;
};

inline DivergenceTable divergence_table(const Profile& profile, std::shared_ptr<const TypeSpace> space) {
    DivergenceTable t{std::move(space), {}, {}};
    const std::size_t m = t.space->size();
    t.f0.assign(m, kInf);
    t.f1.assign(m, kInf);
    parallel_for(m, [&](std::size_t i) {
        auto f = f_pair((*t.space)[i].as_dist(), profile);
        t.f0[i] = f.f0;
        t.f1[i] = f.f1;
    });
    return t;
}

inline DivergenceTable divergence_table(const Profile& profile) {
    return divergence_table(profile, std::make_shared<const TypeSpace>(profile.n(), profile.alphabet_size()));
}

/// Types outside both domains (both f infinite) get phi = 0.
inline TestTable phi_lambda_table(const DivergenceTable& div, double lambda) {
    TestTable t;
    t.space = div.space;
    t.phi.assign(div.space->size(), 0.0);
    for (std::size_t i = 0; i < t.phi.size(); ++i) {
        if (div.f0[i] == kInf && div.f1[i] == kInf) continue;
        t.phi[i] = difference_at_least(div.f0[i], div.f1[i], lambda) ? 1.0 : 0.0;
    }
    return t;
}

inline TestTable phi_eff_table(const DivergenceTable& div) { return phi_lambda_table(div, 0.0); }

/// [-f_P1(M_0), f_P0(M_1)]: the lambda values that trace the region boundary.
inline std::pair<double, double> lambda_range(const Profile& profile) {
    return {-exponent_np(profile), exponent_np(profile.swapped())};
}

// ---------------------------------------------------------------------------
// Packing radius
// ---------------------------------------------------------------------------

struct PackingResult {
    double radius = kInf;
    Dist t;             ///< the minimizing T
    double f0 = kInf;
    double f1 = kInf;
    int evaluations = 0;
};

namespace detail {

/// Range of T(1) over C_Q for a binary alphabet.
inline std::pair<double, double> binary_domain(std::span<const Dist> q, std::span<const double> alpha) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (alpha[k] <= 0.0) continue;
        if (q[k][0] <= 0.0) lo += alpha[k];
        if (q[k][1] > 0.0) hi += alpha[k];
    }
    return {lo, std::min(1.0, hi)};
}

inline std::vector<double> centered_gradient(const ProjectionResult& r, std::span<const double> t) {
    std::vector<double> g(t.size());
    double mean = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) {
        if (!(t[x] > 0.0) || !std::isfinite(r.tilt[x])) return {};
        g[x] = -r.tilt[x];
        mean += g[x];
    }
    mean /= static_cast<double>(t.size());
    for (double& v : g) v -= mean;
    return g;
}

/// Descent direction for max(f0, f1): minus the min-norm element of the hull
/// of the active gradients, scaled to unit sup norm. Empty if unavailable.
inline std::vector<double> bundle_direction(const std::vector<double>& g0, const std::vector<double>& g1, bool a0,
                                            bool a1) {
    std::vector<double> v;
    if (a0 && a1) {
        if (g0.empty() || g1.empty()) return {};
        double num = 0.0, den = 0.0;
        for (std::size_t x = 0; x < g0.size(); ++x) {
            double diff = g1[x] - g0[x];
            num += diff * g1[x];
            den += diff * diff;
        }
        double w = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.5;
        v.resize(g0.size());
        for (std::size_t x = 0; x < v.size(); ++x) v[x] = -(w * g0[x] + (1.0 - w) * g1[x]);
    } else {
        const auto& g = a0 ? g0 : g1;
        if (g.empty()) return {};
        for (double gx : g) v.push_back(-gx);
    }
    double norm = 0.0;
    for (double x : v) norm = std::max(norm, std::abs(x));
    if (!(norm > 0.0)) return {};
    for (double& x : v) x /= norm;
    return v;
}

} // namespace detail

/// r* = min_T max(f_P0(T), f_P1(T)), the largest radius for which the
/// f-balls around P_0 and P_1 stay disjoint. Golden-section search on a
/// binary alphabet; grid plus pattern search otherwise.
inline PackingResult packing_radius(const Profile& profile) {
    const std::size_t d = profile.alphabet_size();
    PackingResult out;
    auto eval = [&](const std::vector<double>& t) {
        ++out.evaluations;
        return f_pair(Dist::normalized(t), profile);
    };
    auto record = [&](const std::vector<double>& t, const FPair& f) {
        double v = std::max(f.f0, f.f1);
        if (v < out.radius || out.t.size() == 0) {
            out.radius = v;
            out.t = Dist::normalized(t);
            out.f0 = f.f0;
            out.f1 = f.f1;
        }
    };

    if (d == 2) {
        auto [lo0, hi0] = detail::binary_domain(profile.p0(), profile.alpha());
        auto [lo1, hi1] = detail::binary_domain(profile.p1(), profile.alpha());
        double lo = std::max(lo0, lo1), hi = std::min(hi0, hi1);
        if (lo > hi) {
            out.t = mixture(profile, 0);
            return out;
        }
        auto value = [&](double s) {
            auto f = eval({1.0 - s, s});
            return std::max(f.f0, f.f1);
        };
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        double c = b - phi * (b - a), e = a + phi * (b - a);
        double fc = value(c), fe = value(e);
        while (b - a > 1e-12) {
            if (fc <= fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - phi * (b - a);
                fc = value(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + phi * (b - a);
                fe = value(e);
            }
        }
        for (double s : {lo, hi, 0.5 * (a + b)}) {
            std::vector<double> t{1.0 - s, s};
            record(t, eval(t));
        }
        return out;
    }

    // Coarse grid over types of length N, then pattern search.
    int grid = 100;
    while (grid > 4 && binomial(grid + static_cast<int>(d) - 1, static_cast<int>(d) - 1) > 5000.0) --grid;
    std::vector<double> best;
    for_each_composition(grid, d, [&](const std::vector<int>& c) {
        std::vector<double> t(d);
        for (std::size_t x = 0; x < d; ++x) t[x] = static_cast<double>(c[x]) / grid;
        auto f = eval(t);
        double before = out.radius;
        record(t, f);
        if (out.radius < before || best.empty()) best = t;
    });
    if (out.radius == kInf) return out;

    auto full = [&](const std::vector<double>& t, ProjectionResult& r0, ProjectionResult& r1) {
        ++out.evaluations;
        Dist td = Dist::normalized(t);
        r0 = f_project(td, profile.p0(), profile.alpha());
        r1 = f_project(td, profile.p1(), profile.alpha());
        return std::max(r0.value, r1.value);
    };
    ProjectionResult r0, r1;
    double fbest = full(best, r0, r1);
    const double h_max = 1.0 / grid;
    double h = h_max;
    while (h > 1e-11 && out.evaluations < 40000) {
        std::vector<std::vector<double>> dirs;
        {
            auto g0 = detail::centered_gradient(r0, best);
            auto g1 = detail::centered_gradient(r1, best);
            double act = 1e-9 * std::max(1.0, fbest);
            bool a0 = r0.value >= fbest - act, a1 = r1.value >= fbest - act;
            auto bd = detail::bundle_direction(g0, g1, a0, a1);
            if (!bd.empty()) dirs.push_back(bd);
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (i != j) {
                    std::vector<double> e(d, 0.0);
                    e[i] = 1.0;
                    e[j] = -1.0;
                    dirs.push_back(e);
                }
        bool improved = false;
        for (const auto& dir : dirs) {
            std::vector<double> t(d);
            bool ok = true;
            for (std::size_t x = 0; x < d; ++x) {
                t[x] = best[x] + h * dir[x];
                if (t[x] < -1e-15) ok = false;
                t[x] = std::max(0.0, t[x]);
            }
            if (!ok) continue;
            ProjectionResult s0, s1;
            double v = full(t, s0, s1);
            if (v < fbest) {
                best = std::move(t);
                fbest = v;
                r0 = std::move(s0);
                r1 = std::move(s1);
                improved = true;
                break;
            }
        }
        h = improved ? std::min(h_max, 2.0 * h) : 0.5 * h;
    }
    out.radius = kInf;
    out.t = Dist();
    record(best, {r0.value, r1.value});
    return out;
}

// ---------------------------------------------------------------------------
// Exponent region boundary
// ---------------------------------------------------------------------------

struct RegionPoint {
    double lambda = 0.0;
    double e0 = kInf;  ///< inf over A_lambda of f_P0
    double e1 = kInf;  ///< inf over the complement of A_lambda of f_P1
};

struct RegionBoundary {
    std::vector<RegionPoint> points;
    double grid_step = 0.0;
    bool monotone = true;  ///< e0 nondecreasing and e1 nonincreasing in lambda (1e-6 slack)
};

struct RegionOptions {
    double grid_step = 0.0;  ///< 0 selects 1e-3 (d=2), 1e-2 (d=3), 1/20 (d=4), 1/10 otherwise
    int bisection_steps = 40;
};

inline double default_region_step(std::size_t d) {
    if (d == 2) return 1e-3;
    if (d == 3) return 1e-2;
    if (d == 4) return 1.0 / 20.0;
    return 1.0 / 10.0;
}

/// Boundary points by dense grid search over the simplex. A_lambda is not
/// convex, so every grid edge whose endpoints fall on opposite sides of
/// f0 - f1 = lambda is bisected; the infima are taken over the closures
/// (points within the decision tolerance count on both sides).
inline RegionBoundary region_boundary(const Profile& profile, std::span<const double> lambdas,
                                      const RegionOptions& opt = {}) {
    const std::size_t d = profile.alphabet_size();
    const auto [lam_lo, lam_hi] = lambda_range(profile);
    for (double l : lambdas)
        if (!(l >= lam_lo - 1e-9 && l <= lam_hi + 1e-9))
            throw InvalidArgument("region_boundary: lambda outside [-f_P1(M_0), f_P0(M_1)]");

    RegionBoundary out;
    out.grid_step = opt.grid_step > 0.0 ? opt.grid_step : default_region_step(d);
    const int N = std::max(1, static_cast<int>(std::lround(1.0 / out.grid_step)));
    out.grid_step = 1.0 / N;

    TypeSpace grid(N, d);
    std::vector<std::vector<double>> pts;
    for (const auto& c : grid.types()) {
        std::vector<double> t(d);
        for (std::size_t x = 0; x < d; ++x) t[x] = static_cast<double>(c[x]) / N;
        pts.push_back(std::move(t));
    }
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        const auto& c = grid[a];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) {
                if (c[j] == 0) continue;
                std::vector<int> nb = c.vec();
                nb[i] += 1;
                nb[j] -= 1;
                edges.emplace_back(a, grid.index_of(nb));
            }
    }
    // The mixtures are the natural endpoints; link them to nearby grid points.
    for (int theta : {0, 1}) {
        auto m = mixture(profile, theta).vec();
        std::size_t id = pts.size();
        for (std::size_t a = 0; a < grid.size(); ++a) {
            double dist = 0.0;
            for (std::size_t x = 0; x < d; ++x) dist = std::max(dist, std::abs(pts[a][x] - m[x]));
            if (dist <= out.grid_step + 1e-12) edges.emplace_back(id, a);
        }
        pts.push_back(std::move(m));
    }

    std::vector<FPair> f(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { f[i] = f_pair(Dist::normalized(pts[i]), profile); });

    // -1: below lambda, 0: tie, +1: above lambda, 2: outside both domains.
    auto side = [](const FPair& v, double lambda) {
        if (v.f0 == kInf && v.f1 == kInf) return 2;
        if (lambda == -kInf || v.f0 == kInf) return 1;
        if (v.f1 == kInf) return -1;
        double diff = v.f0 - v.f1 - lambda;
        if (diff > kDecisionTolerance) return 1;
        if (diff < -kDecisionTolerance) return -1;
        return 0;
    };

    out.points.resize(lambdas.size());
    parallel_for(lambdas.size(), [&](std::size_t li) {
        const double lambda = lambdas[li];
        RegionPoint rp;
        rp.lambda = lambda;
        auto take = [&](const FPair& v, int s) {
            if (s == 1 || s == 0) rp.e0 = std::min(rp.e0, v.f0);
            if (s == -1 || s == 0) rp.e1 = std::min(rp.e1, v.f1);
        };
        std::vector<int> sides(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sides[i] = side(f[i], lambda);
            take(f[i], sides[i]);
        }
        for (auto [a, b] : edges) {
            int sa = sides[a], sb = sides[b];
            if (!((sa == 1 && sb == -1) || (sa == -1 && sb == 1))) continue;
            std::vector<double> above = sa == 1 ? pts[a] : pts[b];
            std::vector<double> below = sa == 1 ? pts[b] : pts[a];
            FPair fa = sa == 1 ? f[a] : f[b], fb = sa == 1 ? f[b] : f[a];
            for (int it = 0; it < opt.bisection_steps; ++it) {
                std::vector<double> mid(d);
                for (std::size_t x = 0; x < d; ++x) mid[x] = 0.5 * (above[x] + below[x]);
                FPair fm = f_pair(Dist::normalized(mid), profile);
                int sm = side(fm, lambda);
                if (sm == 1) {
                    above = std::move(mid);
                    fa = fm;
                } else if (sm == -1) {
                    below = std::move(mid);
                    fb = fm;
                } else {
                    take(fm, sm);
                    break;
                }
            }
            take(fa, 1);
            take(fb, -1);
        }
        if (rp.e0 == kInf && rp.e1 == kInf)
            throw SolverFailure("region_boundary: grid found no point on either side of lambda = " +
                                std::to_string(lambda));
        out.points[li] = rp;
    });

    std::vector<std::size_t> order(lambdas.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        const auto& p = out.points[order[i - 1]];
        const auto& q = out.points[order[i]];
        if (q.e0 < p.e0 - 1e-6 || q.e1 > p.e1 + 1e-6) out.monotone = false;
    }
    return out;
}

} // namespace anondet
