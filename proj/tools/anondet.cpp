// anondet: experiment runner and validation entry point.
//
//   anondet run <config.json> [--output-dir DIR]
//   anondet validate [--inject-failure]
//   anondet project --t 0.3,0.7 --profile profile.json [--theta 1]
//   anondet exponent --profile profile.json
//
// Exit codes: 0 success, 1 validation failure, 2 invalid config or
// arguments, 3 solver failure, 4 I/O failure. Errors are reported on stderr
// as a single JSON object.

#include "runner.hpp"

#include <anondet/validation/acceptance.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace anondet;
using namespace anondet::cli;

enum Exit { kOk = 0, kValidationFailed = 1, kInvalidConfig = 2, kSolverFailure = 3, kIoFailure = 4 };

int report_error(int code, const std::string& kind, const std::string& message) {
    json e = {{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
    std::cerr << e.dump() << "\n";
    return code;
}

json parse_json_file(const std::string& path) {
    std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// A profile file holds either a bare profile object or a config with a
/// "profile" field.
Profile load_profile(const std::string& path) {
    json j = parse_json_file(path);
    if (j.is_object() && j.contains("profile")) return parse_profile(j.at("profile"));
    return parse_profile(j);
}

Dist parse_dist_arg(const std::string& s) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("--t: cannot parse '" + tok + "' as a number");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    try {
        return Dist(std::move(v));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("--t: ") + e.what());
    }
}

json num(double v) {
    if (std::isfinite(v)) return round12(v);
    return fmt(v);  // JSON has no inf or nan literal
}

int cmd_run(const std::string& path, const std::string& output_dir) {
    json j = parse_json_file(path);
    auto base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    ExperimentConfig cfg = parse_config(j, base);
    if (!output_dir.empty()) cfg.output_dir = std::filesystem::absolute(output_dir);
    auto warnings = run_and_write(cfg);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << (cfg.output_dir / "results.csv").string() << "\n";
    return kOk;
}

int cmd_validate(bool inject) {
    acceptance::Options opt;
    opt.inject_failure = inject;
    auto rows = acceptance::run_all(opt);
    std::cout << acceptance::format_report(rows);
    for (const auto& r : rows)
        if (!r.pass) return kValidationFailed;
    return kOk;
}

int cmd_project(const std::string& t_arg, const std::string& profile_path, int theta) {
    Profile p = load_profile(profile_path);
    Dist t = parse_dist_arg(t_arg);
    if (t.size() != p.alphabet_size()) throw ConfigError("--t: alphabet size does not match the profile");
    auto r = f_project(t, p.p(theta), p.alpha());
    json out;
    out["theta"] = theta;
    out["value_bits"] = num(r.value);
    out["status"] = to_string(r.status);
    out["iterations"] = r.iterations;
    out["residual"] = num(r.residual);
    out["duality_gap"] = num(r.duality_gap);
    json u = json::array();
    for (const auto& uk : r.u) {
        json row = json::array();
        for (double v : uk.values()) row.push_back(num(v));
        u.push_back(row);
    }
    out["u"] = u;
    json tilt = json::array();
    for (double v : r.tilt) tilt.push_back(num(v));
    out["tilt_bits"] = tilt;
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_exponent(const std::string& profile_path) {
    Profile p = load_profile(profile_path);
    auto [lo, hi] = lambda_range(p);
    json out;
    out["E_anonymous_bits"] = num(exponent_np(p));
    out["E_informed_bits"] = num(exponent_informed(p));
    out["E_anonymous_swapped_bits"] = num(exponent_np(p.swapped()));
    out["lambda_min_bits"] = num(lo);
    out["lambda_max_bits"] = num(hi);
    if (std::isfinite(lo) && std::isfinite(hi)) {
        auto pr = packing_radius(p);
        out["packing_radius_bits"] = num(pr.radius);
    }
    std::cout << out.dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anonymous heterogeneous distributed detection: exact tests, exponents and experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path, output_dir;
    auto* run = app.add_subcommand("run", "Run an experiment config and write results.csv, manifest.json, plot.svg");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--output-dir", output_dir, "Override the config's output directory");

    bool inject = false;
    auto* validate = app.add_subcommand("validate", "Run every acceptance check and print a pass/fail table");
    validate->add_flag("--inject-failure", inject, "Perturb every tolerance so each check fails (harness self-test)");

    std::string t_arg, profile_path;
    int theta = 1;
    auto* project = app.add_subcommand("project", "Evaluate f_Q(T) and its optimizers");
    project->add_option("--t", t_arg, "Type T as comma-separated probabilities")->required();
    project->add_option("--profile", profile_path, "Profile JSON file")->required();
    project->add_option("--theta", theta, "Hypothesis whose distributions form Q")->check(CLI::Range(0, 1));

    std::string exp_profile;
    auto* exponent = app.add_subcommand("exponent", "Print the anonymous and informed exponents of a profile");
    exponent->add_option("--profile", exp_profile, "Profile JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return report_error(kInvalidConfig, "invalid_arguments", e.what());
    }

    try {
        if (*run) return cmd_run(config_path, output_dir);
        if (*validate) return cmd_validate(inject);
        if (*project) return cmd_project(t_arg, profile_path, theta);
        if (*exponent) return cmd_exponent(exp_profile);
    } catch (const ConfigError& e) {
        return report_error(kInvalidConfig, "invalid_config", e.what());
    } catch (const InvalidArgument& e) {
        return report_error(kInvalidConfig, "invalid_config", e.what());
    } catch (const IoError& e) {
        return report_error(kIoFailure, "io_failure", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return report_error(kIoFailure, "io_failure", e.what());
    } catch (const SolverFailure& e) {
        return report_error(kSolverFailure, "solver_failure", e.what());
    } catch (const CapabilityError& e) {
        return report_error(kSolverFailure, "capability_exceeded", e.what());
    } catch (const std::exception& e) {
        return report_error(kSolverFailure, "internal_error", e.what());
    }
    return kOk;
}
