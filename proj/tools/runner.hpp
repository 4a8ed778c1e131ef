#pragma once

// Declarative experiment configs: parsing, validation and execution.

#include "output.hpp"

#include <anondet/applications.hpp>
#include <anondet/chernoff.hpp>
#include <anondet/exact.hpp>
#include <anondet/parallel.hpp>
#include <anondet/sim.hpp>

#include <json.hpp>

#include <chrono>
#include <climits>
#include <ctime>
#include <filesystem>
#include <optional>

namespace anondet::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Schema violation in a config or profile file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Field readers
// ---------------------------------------------------------------------------

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

inline double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": expected a finite number");
    return x;
}

inline long as_integer(const json& v, const std::string& where, long lo, long hi) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    long x = v.get<long>();
    if (x < lo || x > hi)
        throw ConfigError(where + ": " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    return x;
}

inline std::vector<double> as_numbers(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<long> as_integers(const json& v, const std::string& where, long lo, long hi) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a nonempty array of integers");
    std::vector<long> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as_integer(v[i], where + "[" + std::to_string(i) + "]", lo, hi));
    return out;
}

inline Dist as_dist(const json& v, const std::string& where) {
    auto p = as_numbers(v, where);
    try {
        return Dist(std::move(p));
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

/// Rejects fields not in the allowed set so typos do not pass silently.
inline void only_fields(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
    }
}

/// Either {"p0": [[...]], "p1": [[...]]} with one distribution per group, or
/// the Bernoulli shorthand {"p0_bernoulli": [...], "p1_bernoulli": [...]}
/// giving P(X = 1) per group. Weights come from "alpha" or integer "nu".
inline Profile parse_profile(const json& j, const std::string& where = "profile") {
    only_fields(j, {"p0", "p1", "p0_bernoulli", "p1_bernoulli", "alpha", "nu"}, where);
    std::vector<Dist> p0, p1;
    const bool bern = j.contains("p0_bernoulli") || j.contains("p1_bernoulli");
    if (bern && (j.contains("p0") || j.contains("p1")))
        throw ConfigError(where + ": give either p0/p1 or p0_bernoulli/p1_bernoulli, not both");
    if (bern) {
        for (int theta : {0, 1}) {
            std::string key = theta == 0 ? "p0_bernoulli" : "p1_bernoulli";
            auto ps = as_numbers(require(j, key, where), where + "." + key);
            for (double p : ps) {
                if (p < 0.0 || p > 1.0) throw ConfigError(where + "." + key + ": entries must lie in [0, 1]");
                (theta == 0 ? p0 : p1).push_back(Dist::bernoulli(p));
            }
        }
    } else {
        for (int theta : {0, 1}) {
            std::string key = theta == 0 ? "p0" : "p1";
            const json& arr = require(j, key, where);
            if (!arr.is_array() || arr.empty()) throw ConfigError(where + "." + key + ": expected an array of distributions");
            for (std::size_t k = 0; k < arr.size(); ++k)
                (theta == 0 ? p0 : p1).push_back(as_dist(arr[k], where + "." + key + "[" + std::to_string(k) + "]"));
        }
    }
    if (p0.size() != p1.size()) throw ConfigError(where + ": p0 and p1 have different numbers of groups");
    for (std::size_t k = 0; k < p0.size(); ++k)
        if (p0[k].size() != p0[0].size() || p1[k].size() != p0[0].size())
            throw ConfigError(where + ": all distributions must share one alphabet");
    if (j.contains("alpha") == j.contains("nu")) throw ConfigError(where + ": give exactly one of 'alpha' or 'nu'");
    try {
        if (j.contains("nu")) {
            auto nu = as_integers(j.at("nu"), where + ".nu", 0, 1000000);
            if (nu.size() != p0.size()) throw ConfigError(where + ".nu: length must equal the number of groups");
            return Profile::from_counts(p0, p1, std::vector<int>(nu.begin(), nu.end()));
        }
        auto alpha = as_numbers(j.at("alpha"), where + ".alpha");
        if (alpha.size() != p0.size()) throw ConfigError(where + ".alpha: length must equal the number of groups");
        return Profile(p0, p1, alpha);
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline ByzantineInstance parse_byzantine(const json& j) {
    only_fields(j, {"p0", "p1"}, "byzantine");
    ByzantineInstance inst{as_dist(require(j, "p0", "byzantine"), "byzantine.p0"),
                           as_dist(require(j, "p1", "byzantine"), "byzantine.p1"), 0.0};
    if (inst.p0.size() != inst.p1.size()) throw ConfigError("byzantine: p0 and p1 alphabet sizes differ");
    return inst;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

enum class Experiment { PriceOfAnonymity, ByzantineCompare, PartialInfo, RegionBoundary, FiniteN, Sanov };

inline Experiment parse_experiment(const std::string& s) {
    if (s == "price-of-anonymity") return Experiment::PriceOfAnonymity;
    if (s == "byzantine-compare") return Experiment::ByzantineCompare;
    if (s == "partial-info") return Experiment::PartialInfo;
    if (s == "region-boundary") return Experiment::RegionBoundary;
    if (s == "finite-n-validation") return Experiment::FiniteN;
    if (s == "sanov") return Experiment::Sanov;
    throw ConfigError("experiment: unknown kind '" + s + "'");
}

struct RegionSpec {
    std::string kind;  ///< upper_tail | kl_ball_complement | two_sided
    double value = 0.0;
};

struct ExperimentConfig {
    Experiment kind = Experiment::PriceOfAnonymity;
    std::string kind_name;
    std::optional<Profile> profile;
    std::optional<ByzantineInstance> byzantine;
    std::vector<double> alpha;         ///< alpha grid
    std::vector<double> lambda_bits;   ///< lambda grid
    std::vector<long> L;
    std::vector<long> n;
    double epsilon = 0.1;
    std::vector<RegionSpec> regions;
    double theta_region = 0;
    long trials = 0;
    long budget = 20000;
    double grid_step = 0.0;            ///< 0 selects the default for the alphabet size
    double tolerance_bits = 0.02;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir;
    bool plot = true;
    json canonical;                    ///< parsed document, hashed for provenance
};

/// Validates the whole document before any computation. Relative output
/// directories resolve against base_dir.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
    only_fields(j, {"schema", "experiment", "seed", "output_dir", "plot", "profile", "byzantine", "partial_info",
                    "sweep"},
                "config");
    if (j.contains("schema") && j.at("schema") != "anondet.config.v1")
        throw ConfigError("config.schema: expected 'anondet.config.v1'");
    const json& kind = require(j, "experiment", "config");
    if (!kind.is_string()) throw ConfigError("config.experiment: expected a string");
    ExperimentConfig c;
    c.kind_name = kind.get<std::string>();
    c.kind = parse_experiment(c.kind_name);
    c.canonical = j;
    if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(as_integer(j.at("seed"), "config.seed", 0, LONG_MAX));
    if (j.contains("plot")) {
        if (!j.at("plot").is_boolean()) throw ConfigError("config.plot: expected a boolean");
        c.plot = j.at("plot").get<bool>();
    }
    const json& od = require(j, "output_dir", "config");
    if (!od.is_string() || od.get<std::string>().empty()) throw ConfigError("config.output_dir: expected a path string");
    c.output_dir = std::filesystem::path(od.get<std::string>());
    if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;

    const json empty = json::object();
    const json& sweep = j.contains("sweep") ? j.at("sweep") : empty;
    auto profile_required = [&] {
        if (!j.contains("profile")) throw ConfigError("config: experiment '" + c.kind_name + "' needs a 'profile'");
        c.profile = parse_profile(j.at("profile"));
    };
    auto no_field = [&](const char* key) {
        if (j.contains(key)) throw ConfigError(std::string("config: field '") + key + "' is not used by '" + c.kind_name + "'");
    };
    auto check_alpha = [&](const std::string& where) {
        for (double a : c.alpha)
            if (a < 0.0 || a > 1.0) throw ConfigError(where + ": entries must lie in [0, 1]");
    };

    switch (c.kind) {
    case Experiment::PriceOfAnonymity: {
        profile_required();
        no_field("byzantine");
        no_field("partial_info");
        only_fields(sweep, {"alpha"}, "sweep");
        if (c.profile->groups() != 2) throw ConfigError("profile: price-of-anonymity sweeps need exactly 2 groups");
        c.alpha = as_numbers(require(sweep, "alpha", "sweep"), "sweep.alpha");
        check_alpha("sweep.alpha");
        break;
    }
    case Experiment::ByzantineCompare: {
        if (!j.contains("byzantine")) throw ConfigError("config: experiment 'byzantine-compare' needs 'byzantine'");
        no_field("profile");
        no_field("partial_info");
        c.byzantine = parse_byzantine(j.at("byzantine"));
        only_fields(sweep, {"alpha"}, "sweep");
        c.alpha = as_numbers(require(sweep, "alpha", "sweep"), "sweep.alpha");
        check_alpha("sweep.alpha");
        break;
    }
    case Experiment::PartialInfo: {
        no_field("byzantine");
        if (j.contains("profile") == j.contains("partial_info"))
            throw ConfigError("config: partial-info needs exactly one of 'profile' or 'partial_info'");
        if (j.contains("profile")) {
            c.profile = parse_profile(j.at("profile"));
        } else {
            const json& pi = j.at("partial_info");
            only_fields(pi, {"groups"}, "partial_info");
            c.profile = partial_info_profile(static_cast<int>(as_integer(require(pi, "groups", "partial_info"),
                                                                         "partial_info.groups", 1, 64)));
        }
        if (c.profile->groups() > 64) throw ConfigError("profile: partial-info supports at most 64 groups");
        only_fields(sweep, {"L", "budget"}, "sweep");
        c.L = as_integers(require(sweep, "L", "sweep"), "sweep.L", 0, 6);
        for (long L : c.L)
            if ((1L << L) > static_cast<long>(c.profile->groups()))
                throw ConfigError("sweep.L: 2^L must not exceed the number of groups");
        if (sweep.contains("budget")) c.budget = as_integer(sweep.at("budget"), "sweep.budget", 1, 100000000);
        break;
    }
    case Experiment::RegionBoundary: {
        profile_required();
        no_field("byzantine");
        no_field("partial_info");
        only_fields(sweep, {"lambda_bits", "lambda_points", "grid_step"}, "sweep");
        if (sweep.contains("lambda_bits") == sweep.contains("lambda_points"))
            throw ConfigError("sweep: give exactly one of 'lambda_bits' or 'lambda_points'");
        if (sweep.contains("grid_step")) {
            c.grid_step = as_number(sweep.at("grid_step"), "sweep.grid_step");
            if (c.grid_step <= 0.0 || c.grid_step > 0.5) throw ConfigError("sweep.grid_step: must lie in (0, 0.5]");
        }
        auto [lo, hi] = lambda_range(*c.profile);
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw ConfigError("profile: the exponent region needs finite exponents at both corners");
        if (sweep.contains("lambda_bits")) {
            c.lambda_bits = as_numbers(sweep.at("lambda_bits"), "sweep.lambda_bits");
            for (double l : c.lambda_bits)
                if (l < lo - 1e-12 || l > hi + 1e-12)
                    throw ConfigError("sweep.lambda_bits: " + fmt(l) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
        } else {
            long m = as_integer(sweep.at("lambda_points"), "sweep.lambda_points", 2, 10000);
            for (long i = 0; i < m; ++i) c.lambda_bits.push_back(lo + (hi - lo) * static_cast<double>(i) / (m - 1));
        }
        break;
    }
    case Experiment::FiniteN: {
        profile_required();
        no_field("byzantine");
        no_field("partial_info");
        only_fields(sweep, {"n", "epsilon", "trials"}, "sweep");
        c.n = as_integers(require(sweep, "n", "sweep"), "sweep.n", 1, 100000);
        c.epsilon = as_number(require(sweep, "epsilon", "sweep"), "sweep.epsilon");
        if (c.epsilon <= 0.0 || c.epsilon >= 1.0) throw ConfigError("sweep.epsilon: must lie in (0, 1)");
        if (sweep.contains("trials")) c.trials = as_integer(sweep.at("trials"), "sweep.trials", 0, 100000000);
        break;
    }
    case Experiment::Sanov: {
        profile_required();
        no_field("byzantine");
        no_field("partial_info");
        only_fields(sweep, {"n", "theta", "regions", "tolerance_bits"}, "sweep");
        c.n = as_integers(require(sweep, "n", "sweep"), "sweep.n", 1, 100000);
        for (std::size_t i = 1; i < c.n.size(); ++i)
            if (c.n[i] <= c.n[i - 1]) throw ConfigError("sweep.n: values must be strictly increasing");
        if (c.n.size() < 3) throw ConfigError("sweep.n: the decay fit needs at least three values");
        if (sweep.contains("theta")) c.theta_region = static_cast<double>(as_integer(sweep.at("theta"), "sweep.theta", 0, 1));
        if (sweep.contains("tolerance_bits")) {
            c.tolerance_bits = as_number(sweep.at("tolerance_bits"), "sweep.tolerance_bits");
            if (c.tolerance_bits < 0.0) throw ConfigError("sweep.tolerance_bits: must be nonnegative");
        }
        const json& regions = require(sweep, "regions", "sweep");
        if (!regions.is_array() || regions.empty()) throw ConfigError("sweep.regions: expected a nonempty array");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            std::string where = "sweep.regions[" + std::to_string(i) + "]";
            const json& r = regions[i];
            only_fields(r, {"kind", "threshold", "delta_bits", "width"}, where);
            const json& k = require(r, "kind", where);
            if (!k.is_string()) throw ConfigError(where + ".kind: expected a string");
            RegionSpec spec{k.get<std::string>(), 0.0};
            if (spec.kind == "upper_tail") {
                spec.value = as_number(require(r, "threshold", where), where + ".threshold");
                if (c.profile->alphabet_size() != 2) throw ConfigError(where + ": upper_tail needs a binary alphabet");
            } else if (spec.kind == "kl_ball_complement") {
                spec.value = as_number(require(r, "delta_bits", where), where + ".delta_bits");
                if (spec.value <= 0.0) throw ConfigError(where + ".delta_bits: must be positive");
            } else if (spec.kind == "two_sided") {
                spec.value = as_number(require(r, "width", where), where + ".width");
                if (c.profile->alphabet_size() != 2) throw ConfigError(where + ": two_sided needs a binary alphabet");
            } else {
                throw ConfigError(where + ".kind: unknown region '" + spec.kind + "'");
            }
            c.regions.push_back(spec);
        }
        break;
    }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct RunOutput {
    Table table;
    std::vector<Series> series;
    std::string title, xlabel, ylabel;
    json grids = json::object();
    std::vector<std::string> warnings;
};

/// Wraps a solver failure with the sweep point that raised it.
template <class Fn>
auto at_point(const std::string& what, Fn&& fn) {
    try {
        return fn();
    } catch (const SolverFailure& e) {
        throw SolverFailure(what + ": " + e.what());
    } catch (const CapabilityError& e) {
        throw CapabilityError(what + ": " + e.what());
    }
}

inline RunOutput run_price_of_anonymity(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.price-of-anonymity.v1",
                 {"alpha", "E_anonymous_bits", "E_informed_bits", "anonymous_status", "informed_status"},
                 {}};
    std::vector<std::vector<std::string>> rows(c.alpha.size());
    std::vector<double> ea(c.alpha.size()), ei(c.alpha.size());
    parallel_for(c.alpha.size(), [&](std::size_t i) {
        const double a = c.alpha[i];
        Profile p(c.profile->p0(), c.profile->p1(), {1.0 - a, a});
        at_point("alpha=" + fmt(a), [&] {
            auto anon = f_project(mixture(p, 0), p.p1(), p.alpha());
            double inf = exponent_informed(p);
            ea[i] = anon.value;
            ei[i] = inf;
            rows[i] = {fmt(a), fmt(anon.value), fmt(inf), to_string(anon.status), std::isfinite(inf) ? "converged" : "infinite"};
            return 0;
        });
    });
    out.table.rows = rows;
    out.series = {{"anonymous", c.alpha, ea}, {"informed", c.alpha, ei}};
    out.title = "Price of anonymity";
    out.xlabel = "alpha (weight of group 2)";
    out.ylabel = "type-II exponent (bits)";
    out.grids["alpha"] = c.alpha.size();
    return out;
}

inline RunOutput run_byzantine_compare(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.byzantine-compare.v1", {"alpha", "E_composite_bits", "E_iid_bits"}, {}};
    std::vector<std::vector<std::string>> rows(c.alpha.size());
    std::vector<double> ew(c.alpha.size()), eiid(c.alpha.size());
    parallel_for(c.alpha.size(), [&](std::size_t i) {
        ByzantineInstance inst = *c.byzantine;
        inst.alpha = c.alpha[i];
        at_point("alpha=" + fmt(inst.alpha), [&] {
            ew[i] = byzantine_worst_exponent(inst);
            eiid[i] = byzantine_iid_exponent(inst);
            rows[i] = {fmt(inst.alpha), fmt(ew[i]), fmt(eiid[i])};
            return 0;
        });
    });
    out.table.rows = rows;
    out.series = {{"composite", c.alpha, ew}, {"iid", c.alpha, eiid}};
    out.title = "Byzantine fraction";
    out.xlabel = "alpha (Byzantine fraction)";
    out.ylabel = "type-II exponent (bits)";
    out.grids["alpha"] = c.alpha.size();
    return out;
}

/// Blocks separated by '|', members 0-based.
inline std::string clustering_string(const Clustering& cl) {
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(cl.blocks));
    for (std::size_t k = 0; k < cl.assign.size(); ++k) blocks[static_cast<std::size_t>(cl.assign[k])].push_back(static_cast<int>(k));
    std::string s;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b) s += "|";
        for (std::size_t i = 0; i < blocks[b].size(); ++i) s += (i ? " " : "") + std::to_string(blocks[b][i]);
    }
    return s;
}

inline RunOutput run_partial_info(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.partial-info.v1", {"L", "E_bits", "search_status", "evaluations", "clustering"}, {}};
    std::vector<std::vector<std::string>> rows(c.L.size());
    std::vector<double> xs, es(c.L.size());
    parallel_for(c.L.size(), [&](std::size_t i) {
        at_point("L=" + std::to_string(c.L[i]), [&] {
            auto r = best_clustering(*c.profile, static_cast<int>(c.L[i]), c.budget, c.seed);
            es[i] = r.exponent;
            rows[i] = {std::to_string(c.L[i]), fmt(r.exponent), to_string(r.status), std::to_string(r.evaluations),
                       clustering_string(r.clustering)};
            return 0;
        });
    });
    for (long L : c.L) xs.push_back(static_cast<double>(L));
    out.table.rows = rows;
    out.series = {{"best clustering", xs, es}};
    out.title = "Exponents with partial information";
    out.xlabel = "L (bits per sensor)";
    out.ylabel = "type-II exponent (bits)";
    out.grids["L"] = c.L;
    out.grids["budget"] = c.budget;
    return out;
}

inline RunOutput run_region_boundary(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.region-boundary.v1", {"lambda_bits", "E0_bits", "E1_bits"}, {}};
    RegionOptions opt;
    opt.grid_step = c.grid_step;
    auto rb = at_point("region-boundary", [&] { return region_boundary(*c.profile, c.lambda_bits, opt); });
    std::vector<double> e0, e1;
    for (const auto& p : rb.points) {
        out.table.rows.push_back({fmt(p.lambda), fmt(p.e0), fmt(p.e1)});
        e0.push_back(p.e0);
        e1.push_back(p.e1);
    }
    auto pr = at_point("packing radius", [&] { return packing_radius(*c.profile); });
    out.series = {{"boundary", e0, e1}};
    out.title = "Exponent region boundary";
    out.xlabel = "E0 (bits)";
    out.ylabel = "E1 (bits)";
    out.grids["lambda_points"] = c.lambda_bits.size();
    out.grids["type_grid_step"] = round12(rb.grid_step);
    out.grids["monotone"] = rb.monotone;
    out.grids["packing_radius_bits"] = round12(pr.radius);
    if (!rb.monotone) out.warnings.push_back("region boundary is not monotone in lambda");
    return out;
}

inline RunOutput run_finite_n(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.finite-n-validation.v1",
                 {"n", "epsilon", "pf_mlrt", "pm_mlrt", "pm_glrt", "neg_log2_pm_over_n_bits", "E_anonymous_bits",
                  "mc_trials", "mc_pf", "mc_pm", "mc_pm_lo", "mc_pm_hi"},
                 {}};
    const double e_anon = at_point("exponent", [&] { return exponent_np(*c.profile); });
    std::vector<std::vector<std::string>> rows(c.n.size());
    std::vector<double> xs, ys(c.n.size()), es(c.n.size(), e_anon);
    parallel_for(c.n.size(), [&](std::size_t i) {
        const int n = static_cast<int>(c.n[i]);
        at_point("n=" + std::to_string(n), [&] {
            Profile p = c.profile->has_counts() && c.profile->n() == n ? *c.profile : c.profile->at_n(n);
            auto orb = orbit_tables(p);
            auto mlrt = exact_errors(calibrate_np(orb, c.epsilon), orb);
            auto glrt = exact_errors(calibrate_glrt(p, orb, c.epsilon), orb);
            ys[i] = -mlrt.log2_pm / n;
            std::vector<std::string> row = {std::to_string(n), fmt(c.epsilon), fmt(mlrt.pf), fmt(mlrt.pm),
                                            fmt(glrt.pm), fmt(ys[i]), fmt(e_anon)};
            if (c.trials > 0) {
                auto mc = simulate_errors(p, "mlrt:" + fmt(c.epsilon), c.trials, c.seed + static_cast<std::uint64_t>(i));
                row.insert(row.end(), {std::to_string(c.trials), fmt(mc.pf), fmt(mc.pm), fmt(mc.pm_ci.lo),
                                       fmt(mc.pm_ci.hi)});
            } else {
                row.insert(row.end(), {"0", "", "", "", ""});
            }
            rows[i] = row;
            return 0;
        });
    });
    for (long n : c.n) xs.push_back(static_cast<double>(n));
    out.table.rows = rows;
    out.series = {{"-log2 beta / n", xs, ys}, {"asymptotic exponent", xs, es}};
    out.title = "Finite-n type-II error";
    out.xlabel = "n";
    out.ylabel = "bits per sensor";
    out.grids["n"] = c.n;
    out.grids["apportionment"] = "largest-remainder";
    return out;
}

inline TypeRegion make_region(const RegionSpec& s, const Profile& p, int theta) {
    const Dist m = mixture(p, theta);
    const double v = s.value;
    if (s.kind == "upper_tail")
        return {"upper_tail_" + fmt(v), [v](const Dist& t) { return t[1] - v; }, 1e-9};
    if (s.kind == "kl_ball_complement")
        return {"kl_ball_complement_" + fmt(v), [m, v](const Dist& t) { return kl(t, m) - v; }, 1e-9};
    return {"two_sided_" + fmt(v), [m, v](const Dist& t) { return std::abs(t[1] - m[1]) - v; }, 1e-9};
}

inline RunOutput run_sanov(const ExperimentConfig& c) {
    RunOutput out;
    out.table = {"anondet.sanov.v1",
                 {"region", "theta", "n_min", "n_max", "slope_bits", "inf_closure_bits", "inf_interior_bits",
                  "tolerance_bits", "pass"},
                 {}};
    const int theta = static_cast<int>(c.theta_region);
    std::vector<int> ns(c.n.begin(), c.n.end());
    std::vector<std::optional<SanovReport>> reports(c.regions.size());
    parallel_for(c.regions.size(), [&](std::size_t i) {
        auto g = make_region(c.regions[i], *c.profile, theta);
        reports[i] = at_point("region " + g.name, [&] { return sanov_check(*c.profile, g, ns, theta, c.tolerance_bits); });
    });
    for (const auto& r : reports) {
        auto [mn, mx] = std::minmax_element(r->ns.begin(), r->ns.end());
        out.table.rows.push_back({r->region, std::to_string(theta), std::to_string(*mn), std::to_string(*mx),
                                  fmt(r->fit.slope), fmt(r->infima.closure), fmt(r->infima.interior),
                                  fmt(r->tolerance), r->pass ? "true" : "false"});
        std::vector<double> x, y;
        for (std::size_t k = 0; k < r->ns.size(); ++k) {
            x.push_back(r->ns[k]);
            y.push_back(-r->log2_prob[k] / r->ns[k]);
        }
        out.series.push_back({r->region, x, y});
        for (const auto& w : r->fit.warnings) out.warnings.push_back(r->region + ": " + w);
        out.grids["type_grid_step"] = round12(r->infima.grid_step);
    }
    out.title = "Type-class probability decay";
    out.xlabel = "n";
    out.ylabel = "-log2 P / n (bits)";
    out.grids["n"] = c.n;
    return out;
}

inline RunOutput run_experiment(const ExperimentConfig& c) {
    switch (c.kind) {
    case Experiment::PriceOfAnonymity: return run_price_of_anonymity(c);
    case Experiment::ByzantineCompare: return run_byzantine_compare(c);
    case Experiment::PartialInfo: return run_partial_info(c);
    case Experiment::RegionBoundary: return run_region_boundary(c);
    case Experiment::FiniteN: return run_finite_n(c);
    case Experiment::Sanov: return run_sanov(c);
    }
    throw ConfigError("unreachable experiment kind");
}

inline std::string utc_timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string compiler_id() {
#if defined(__clang__)
    return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    return std::string("gcc ") + __VERSION__;
#else
    return "unknown";
#endif
}

/// Runs the experiment and writes results.csv, manifest.json and, unless
/// disabled, plot.svg into the output directory. Returns the warnings.
inline std::vector<std::string> run_and_write(const ExperimentConfig& c) {
    const std::string hash = hex64(fnv1a64(c.canonical.dump()));
    RunOutput out = run_experiment(c);

    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec) throw IoError("cannot create " + c.output_dir.string() + ": " + ec.message());

    std::vector<std::string> files = {"results.csv", "manifest.json"};
    write_file((c.output_dir / "results.csv").string(), out.table.csv());
    if (c.plot) {
        files.push_back("plot.svg");
        write_file((c.output_dir / "plot.svg").string(),
                   render_svg(out.title, out.xlabel, out.ylabel, out.series,
                              "config_hash=fnv1a64:" + hash + "; experiment=" + c.kind_name + "; schema=" +
                                  out.table.schema));
    }
    json m;
    m["config_hash"] = "fnv1a64:" + hash;
    m["experiment"] = c.kind_name;
    m["schema"] = out.table.schema;
    m["seed"] = c.seed;
    m["versions"] = {{"anondet", kToolVersion}, {"compiler", compiler_id()}, {"cplusplus", __cplusplus}};
    m["grids"] = out.grids;
    m["files"] = files;
    m["rows"] = out.table.rows.size();
    m["warnings"] = out.warnings;
    m["timestamp"] = utc_timestamp();
    write_file((c.output_dir / "manifest.json").string(), m.dump(2) + "\n");
    return out.warnings;
}

} // namespace anondet::cli
