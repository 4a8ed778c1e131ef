#pragma once

// Monte Carlo error estimation, empirical decay-rate fits and the exact
// large-deviation sandwich check for type regions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "anondet/chernoff.hpp"
#include "anondet/error.hpp"
#include "anondet/exact.hpp"
#include "anondet/parallel.hpp"
#include "anondet/prob.hpp"
#include "anondet/projection.hpp"

namespace anondet {

// ---------------------------------------------------------------------------
// Counter-based random numbers
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0,1) determined by (seed, stream, trial, index) alone.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t trial, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Test identifiers
// ---------------------------------------------------------------------------

enum class TestKind { Mlrt, Glrt, Hoeffding, PhiEff, PhiLambda };

struct TestSpec {
    TestKind kind = TestKind::Mlrt;
    double param = 0.0;
};

/// Parses "mlrt:<eps>", "glrt:<eps>", "hoeffding:<delta>", "phi_eff" or
/// "phi_lambda:<lambda>".
inline TestSpec parse_test_id(const std::string& id) {
    auto colon = id.find(':');
    std::string name = id.substr(0, colon);
    bool has_param = colon != std::string::npos;
    double param = 0.0;
    if (has_param) {
        try {
            std::size_t used = 0;
            param = std::stod(id.substr(colon + 1), &used);
            if (used != id.size() - colon - 1) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw InvalidArgument("unknown test id '" + id + "': bad parameter");
        }
    }
    if (name == "mlrt" && has_param) return {TestKind::Mlrt, param};
    if (name == "glrt" && has_param) return {TestKind::Glrt, param};
    if (name == "hoeffding" && has_param) return {TestKind::Hoeffding, param};
    if (name == "phi_eff" && !has_param) return {TestKind::PhiEff, 0.0};
    if (name == "phi_lambda" && has_param) return {TestKind::PhiLambda, param};
    throw InvalidArgument("unknown test id '" + id + "'");
}

inline TestTable build_test(const Profile& profile, const TestSpec& spec, const OrbitTables& orb) {
    switch (spec.kind) {
    case TestKind::Mlrt: return calibrate_np(orb, spec.param);
    case TestKind::Glrt: return calibrate_glrt(profile, orb, spec.param);
    case TestKind::Hoeffding: return hoeffding_table(profile, spec.param);
    case TestKind::PhiEff: return phi_eff_table(divergence_table(profile, orb.space));
    case TestKind::PhiLambda: return phi_lambda_table(divergence_table(profile, orb.space), spec.param);
    }
    throw InvalidArgument("build_test: unknown test kind");
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Wilson score interval at z = 1.959964 (95%).
inline Interval wilson_interval(long successes, long trials) {
    if (trials <= 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double n = static_cast<double>(trials), p = successes / n;
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    // The closed form cancels to 0 or 1 at the extremes; avoid rounding residue.
    const double lo = successes <= 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes >= trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

struct TrialReport {
    std::string test_id;
    int n = 0;
    long trials = 0;
    std::uint64_t seed = 0;
    std::vector<int> sigma;  ///< group of each sensor
    long false_alarms = 0;
    long misses = 0;
    double pf = 0.0;
    double pm = 0.0;
    Interval pf_ci;
    Interval pm_ci;

    friend bool operator==(const TrialReport&, const TrialReport&) = default;
};

/// Sensors 0..nu_1-1 in group 0, the next nu_2 in group 1, and so on.
inline std::vector<int> default_labeling(std::span<const int> nu) {
    std::vector<int> s;
    for (std::size_t k = 0; k < nu.size(); ++k) s.insert(s.end(), nu[k], static_cast<int>(k));
    return s;
}

/// Estimates (pf, pm) of a symmetric test by simulation under the labeling
/// sigma (default: the sorted labeling). Deterministic in (seed, trial).
inline TrialReport simulate_errors(const Profile& profile, const std::string& test_id, long trials,
                                   std::uint64_t seed, std::vector<int> sigma = {}) {
    if (trials < 1) throw InvalidArgument("simulate_errors: trials must be at least 1");
    const TestSpec spec = parse_test_id(test_id);
    const int n = profile.n();
    const std::size_t d = profile.alphabet_size();
    if (sigma.empty()) sigma = default_labeling(profile.nu());
    if (static_cast<int>(sigma.size()) != n) throw InvalidArgument("simulate_errors: labeling length differs from n");
    {
        std::vector<int> counts(profile.groups(), 0);
        for (int g : sigma) {
            if (g < 0 || g >= static_cast<int>(profile.groups()))
                throw InvalidArgument("simulate_errors: labeling refers to an unknown group");
            counts[g] += 1;
        }
        if (!std::equal(counts.begin(), counts.end(), profile.nu().begin()))
            throw InvalidArgument("simulate_errors: labeling does not match group sizes");
    }

    auto orb = orbit_tables(profile);
    const TestTable test = build_test(profile, spec, orb);

    // Per-hypothesis cumulative distributions of each sensor.
    std::vector<std::vector<std::vector<double>>> cdf(2);
    for (int theta = 0; theta < 2; ++theta)
        for (std::size_t k = 0; k < profile.groups(); ++k) {
            std::vector<double> c(d);
            double acc = 0.0;
            for (std::size_t x = 0; x < d; ++x) c[x] = (acc += profile.p(theta)[k][x]);
            c[d - 1] = 1.0;
            cdf[theta].push_back(std::move(c));
        }

    const std::size_t chunk = 4096;
    const std::size_t chunks = (static_cast<std::size_t>(trials) + chunk - 1) / chunk;
    std::vector<long> fa(chunks, 0), mi(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        std::vector<int> counts(d);
        const std::uint64_t begin = c * chunk, end = std::min<std::uint64_t>(begin + chunk, trials);
        for (std::uint64_t t = begin; t < end; ++t) {
            for (int theta = 0; theta < 2; ++theta) {
                std::fill(counts.begin(), counts.end(), 0);
                for (int i = 0; i < n; ++i) {
                    double u = counter_uniform(seed, theta, t, static_cast<std::uint64_t>(i));
                    const auto& cd = cdf[theta][sigma[i]];
                    std::size_t x = static_cast<std::size_t>(std::upper_bound(cd.begin(), cd.end(), u) - cd.begin());
                    counts[std::min(x, d - 1)] += 1;
                }
                double phi = test.phi[orb.space->index_of(counts)];
                double u = counter_uniform(seed, theta, t, static_cast<std::uint64_t>(n));
                bool decide_h1 = u < phi;
                if (theta == 0 && decide_h1) ++fa[c];
                if (theta == 1 && !decide_h1) ++mi[c];
            }
        }
    });

    TrialReport r;
    r.test_id = test_id;
    r.n = n;
    r.trials = trials;
    r.seed = seed;
    r.sigma = std::move(sigma);
    for (std::size_t c = 0; c < chunks; ++c) {
        r.false_alarms += fa[c];
        r.misses += mi[c];
    }
    r.pf = static_cast<double>(r.false_alarms) / trials;
    r.pm = static_cast<double>(r.misses) / trials;
    r.pf_ci = wilson_interval(r.false_alarms, trials);
    r.pm_ci = wilson_interval(r.misses, trials);
    return r;
}

// ---------------------------------------------------------------------------
// Decay-rate fit
// ---------------------------------------------------------------------------

struct DecayFit {
    double slope = 0.0;      ///< exponent estimate, bits per observation
    double intercept = 0.0;
    double residual = 0.0;   ///< root-mean-square residual of -log2 error
    std::vector<std::string> warnings;
};

/// Least-squares line through (n, -log2 error). Points with error exactly 0
/// are dropped with a warning.
inline DecayFit decay_fit(std::span<const std::pair<int, double>> points) {
    DecayFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto [n, log2_err] = points[i];
        if (i > 0 && n <= points[i - 1].first) throw InvalidArgument("decay_fit: n must be strictly increasing");
        if (log2_err == -kInf) {
            fit.warnings.push_back("dropped n = " + std::to_string(n) + ": error estimate is exactly 0");
            continue;
        }
        if (!std::isfinite(log2_err)) throw InvalidArgument("decay_fit: log2 error must be finite or -inf");
        xs.push_back(n);
        ys.push_back(-log2_err);
    }
    if (xs.size() < 3) throw InvalidArgument("decay_fit: need at least 3 usable points");
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("decay_fit: degenerate n values");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / m);
    return fit;
}

// ---------------------------------------------------------------------------
// Region infima and the Sanov sandwich
// ---------------------------------------------------------------------------

/// Gamma = {T : score(T) >= 0}. Its interior is approximated by
/// score > margin and its closure by score >= -margin.
struct TypeRegion {
    std::string name;
    std::function<double(const Dist&)> score;
    double margin = 1e-9;
};

struct RegionInfima {
    double closure = kInf;   ///< inf over cl Gamma
    double interior = kInf;  ///< inf over int Gamma
    double grid_step = 0.0;
};

/// Grid infima of f over cl Gamma and int Gamma, refining every grid edge
/// that crosses the boundary of Gamma by bisection.
inline RegionInfima region_infima(std::size_t d, const std::function<double(const Dist&)>& f, const TypeRegion& g,
                                  double step = 0.0) {
    RegionInfima out;
    out.grid_step = step > 0.0 ? step : default_region_step(d);
    const int N = std::max(1, static_cast<int>(std::lround(1.0 / out.grid_step)));
    out.grid_step = 1.0 / N;
    TypeSpace grid(N, d);
    std::vector<std::vector<double>> pts;
    for (const auto& c : grid.types()) {
        std::vector<double> t(d);
        for (std::size_t x = 0; x < d; ++x) t[x] = static_cast<double>(c[x]) / N;
        pts.push_back(std::move(t));
    }
    std::vector<double> sc(pts.size()), fv(pts.size(), kInf);
    parallel_for(pts.size(), [&](std::size_t i) {
        Dist t = Dist::normalized(pts[i]);
        sc[i] = g.score(t);
        if (sc[i] >= -g.margin) fv[i] = f(t);
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (sc[i] >= -g.margin) out.closure = std::min(out.closure, fv[i]);
        if (sc[i] > g.margin) out.interior = std::min(out.interior, fv[i]);
    }
    for (std::size_t a = 0; a < grid.size(); ++a) {
        const auto& c = grid[a];
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) {
                if (c[j] == 0) continue;
                std::vector<int> nb = c.vec();
                nb[i] += 1;
                nb[j] -= 1;
                std::size_t b = grid.index_of(nb);
                if ((sc[a] >= 0.0) == (sc[b] >= 0.0)) continue;
                std::vector<double> in = sc[a] >= 0.0 ? pts[a] : pts[b];
                std::vector<double> outp = sc[a] >= 0.0 ? pts[b] : pts[a];
                for (int it = 0; it < 45; ++it) {
                    std::vector<double> mid(d);
                    for (std::size_t x = 0; x < d; ++x) mid[x] = 0.5 * (in[x] + outp[x]);
                    (g.score(Dist::normalized(mid)) >= 0.0 ? in : outp) = std::move(mid);
                }
                Dist edge = Dist::normalized(in);
                double v = f(edge);
                out.closure = std::min(out.closure, v);
                // The boundary point is a limit of interior points along the edge.
                out.interior = std::min(out.interior, v);
            }
    }
    return out;
}

struct SanovReport {
    std::string region;
    int theta = 0;
    std::vector<int> ns;
    std::vector<double> log2_prob;
    DecayFit fit;
    RegionInfima infima;
    double tolerance = 0.02;
    bool pass = false;
};

/// Exact log2 P~_theta{Pi in Gamma} for each n, its decay slope, and whether
/// the slope lies in [inf_cl f, inf_int f] up to the tolerance.
inline SanovReport sanov_check(const Profile& profile, const TypeRegion& gamma, std::span<const int> ns, int theta,
                               double tolerance = 0.02) {
    if (theta != 0 && theta != 1) throw InvalidArgument("sanov_check: theta must be 0 or 1");
    SanovReport r;
    r.region = gamma.name;
    r.theta = theta;
    r.tolerance = tolerance;
    std::vector<std::pair<int, double>> pts;
    bool any = false;
    for (int n : ns) {
        Profile pn = profile.at_n(n);
        auto orb = orbit_tables(pn);
        std::vector<double> terms;
        for (std::size_t i = 0; i < orb.space->size(); ++i) {
            const auto& v = (*orb.space)[i];
            if (gamma.score(v.as_dist()) >= 0.0) {
                any = true;
                terms.push_back(orb.log_p(theta)[i]);
            }
        }
        double lp = terms.empty() ? -kInf : log2_sum(terms);
        r.ns.push_back(n);
        r.log2_prob.push_back(lp);
        pts.emplace_back(n, lp);
    }
    if (!any) throw InvalidArgument("sanov_check: region '" + gamma.name + "' contains no type at any tested n");
    r.fit = decay_fit(pts);
    const auto& q = profile.p(theta);
    auto alpha = profile.alpha();
    r.infima = region_infima(profile.alphabet_size(), [&](const Dist& t) { return f_value(t, q, alpha); }, gamma);
    r.pass = r.fit.slope >= r.infima.closure - tolerance && r.fit.slope <= r.infima.interior + tolerance;
    return r;
}

/// The shipped demo regions for a binary alphabet.
inline std::vector<TypeRegion> demo_regions(const Profile& profile) {
    const Dist m0 = mixture(profile, 0);
    return {
        {"upper_tail_0.7", [](const Dist& t) { return t[1] - 0.7; }, 1e-9},
        {"kl_ball_complement_0.1", [m0](const Dist& t) { return kl(t, m0) - 0.1; }, 1e-9},
        {"two_sided_0.25", [m0](const Dist& t) { return std::abs(t[1] - m0[1]) - 0.25; }, 1e-9},
    };
}

} // namespace anondet
