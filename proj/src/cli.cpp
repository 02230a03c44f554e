#include "fdbreak/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "fdbreak/detect.hpp"
#include "fdbreak/errors.hpp"
#include "fdbreak/inference.hpp"
#include "fdbreak/parallel.hpp"
#include "fdbreak/simharness.hpp"

namespace fdbreak {

using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

struct LoadedCurves {
    CurveSet curves;
    std::string digest;
};

LoadedCurves load_curves(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    std::istringstream parse(bytes);
    return {read_curves_csv(parse), sha256_hex(bytes)};
}

KernelSpec kernel_from_flags(const std::string& kernel, const std::string& gamma) {
    KernelSpec spec{parse_kernel_family(kernel), std::nullopt};
    if (gamma != "auto") {
        double value = 0.0;
        std::size_t used = 0;
        try {
            value = std::stod(gamma, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != gamma.size()) throw ArgumentError("--gamma must be 'auto' or a positive number");
        if (spec.family != KernelFamily::Grb) throw ArgumentError("--gamma applies to the grb kernel only");
        spec.gamma = value;
    }
    spec.validate();
    return spec;
}

json manifest(const std::string& subcommand, json flags, const std::optional<std::string>& digest,
              std::optional<std::uint64_t> seed) {
    return {{"subcommand", subcommand},
            {"flags", std::move(flags)},
            {"input_digest", digest ? json(*digest) : json(nullptr)},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"version", kVersion}};
}

std::vector<double> trace_values(const std::string& list) {
    std::vector<double> values;
    std::stringstream ss(list);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || !std::isfinite(v)) throw ArgumentError("--trace expects comma-separated numbers");
        values.push_back(v);
    }
    if (values.size() < 3) throw ArgumentError("--trace needs at least 3 values (S_0..S_n with n >= 2)");
    return values;
}

struct KernelFlags {
    std::string kernel = "grb";
    std::string gamma = "auto";

    void add(CLI::App* app) {
        app->add_option("--kernel", kernel, "Kernel family")->check(CLI::IsMember({"grb", "linear", "quadratic"}));
        app->add_option("--gamma", gamma, "GRB bandwidth: auto (median heuristic) or a positive number");
    }
    json to_json() const { return {{"kernel", kernel}, {"gamma", gamma}}; }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Detect, date and bracket a distributional break in a sequence of curves"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (results do not depend on it); env FDBREAK_THREADS")
        ->check(CLI::NonNegativeNumber);

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Test for a break and report T_n, p-value and the break date");
    std::string detect_input;
    KernelFlags detect_kernel;
    double detect_alpha = 0.05;
    double detect_fve = kDefaultFve;
    std::string rank_select = "fve";
    int manual_p = 0;
    int p_max = 0;
    int null_reps = kDefaultNullReps;
    int bridge_grid = kDefaultBridgeGrid;
    std::uint64_t detect_seed = kDefaultSeed;
    detect_cmd->add_option("curves", detect_input, "CSV: grid row, then one curve per row")->required();
    detect_kernel.add(detect_cmd);
    detect_cmd->add_option("--alpha", detect_alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    detect_cmd->add_option("--fve", detect_fve, "Fraction of variance explained for choosing p");
    detect_cmd->add_option("--rank-select", rank_select, "fve or loocv")->check(CLI::IsMember({"fve", "loocv"}));
    detect_cmd->add_option("--p", manual_p, "Manual number of eigenvalues (overrides --rank-select)");
    detect_cmd->add_option("--p-max", p_max, "Largest p tried by loocv (default min(n-1, 30))");
    detect_cmd->add_option("--null-reps", null_reps, "Null-law Monte Carlo replications");
    detect_cmd->add_option("--bridge-grid", bridge_grid, "Brownian-bridge grid size");
    detect_cmd->add_option("--seed", detect_seed, "Master seed");

    // date
    auto* date_cmd = app.add_subcommand("date", "Estimate the break date only");
    std::string date_input;
    std::string date_trace;
    KernelFlags date_kernel;
    date_cmd->add_option("curves", date_input, "CSV of curves");
    date_cmd->add_option("--trace", date_trace, "Comma-separated CUSUM trace S_0..S_n instead of curves");
    date_kernel.add(date_cmd);

    // ci
    auto* ci_cmd = app.add_subcommand("ci", "Confidence interval for the break date");
    std::string ci_input;
    KernelFlags ci_kernel;
    std::string ci_method = "bootstrap";
    int boot_reps = 500;
    double ci_alpha = 0.05;
    std::uint64_t ci_seed = kDefaultSeed;
    int lambda_reps = 2000;
    double x_range = 0.0;
    double x_step = 0.0;
    ci_cmd->add_option("curves", ci_input, "CSV of curves")->required();
    ci_kernel.add(ci_cmd);
    ci_cmd->add_option("--method", ci_method, "bootstrap, asymptotic or both")
        ->check(CLI::IsMember({"bootstrap", "asymptotic", "both"}));
    ci_cmd->add_option("--B", boot_reps, "Bootstrap replications");
    ci_cmd->add_option("--alpha", ci_alpha, "1 - confidence level")->check(CLI::Range(0.0, 1.0));
    ci_cmd->add_option("--seed", ci_seed, "Master seed");
    ci_cmd->add_option("--lambda-reps", lambda_reps, "Paths of the limiting process (asymptotic)");
    ci_cmd->add_option("--x-range", x_range, "Half-width of the simulation range (asymptotic; 0 = automatic)");
    ci_cmd->add_option("--x-step", x_step, "Simulation step (asymptotic; 0 = automatic)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo size, power and coverage experiment");
    int setting = 1;
    std::vector<int> sim_n{100};
    std::vector<double> sim_tau{0.0};
    std::vector<double> sim_param{0.0};
    int sim_reps = 200;
    std::uint64_t sim_seed = kDefaultSeed;
    bool sim_coverage = false;
    bool sim_no_detect = false;
    int sim_boot = 500;
    double sim_alpha = 0.05;
    std::vector<std::string> sim_kernels{"grb"};
    int sim_null_reps = kDefaultNullReps;
    int sim_bridge_grid = kDefaultBridgeGrid;
    double sim_fve = kDefaultFve;
    int grid_size = 50;
    int n_basis = 21;
    bool snr_squared = false;
    bool independent_null = false;
    bool timing = false;
    std::string csv_path;
    sim_cmd->add_option("--setting", setting, "1 mean shift, 2 covariance scale, 3 score mixture")
        ->check(CLI::Range(1, 3));
    sim_cmd->add_option("--n", sim_n, "Sample sizes")->delimiter(',');
    sim_cmd->add_option("--tau-star", sim_tau, "Break fractions (0 = no break)")->delimiter(',');
    sim_cmd->add_option("--param", sim_param, "SNR (1), c (2) or pi (3)")->delimiter(',');
    sim_cmd->add_option("--reps", sim_reps, "Monte Carlo replications per cell");
    sim_cmd->add_option("--seed", sim_seed, "Master seed");
    sim_cmd->add_flag("--coverage", sim_coverage, "Bootstrap interval coverage");
    sim_cmd->add_flag("--no-detect", sim_no_detect, "Skip the test (dating and coverage only)");
    sim_cmd->add_option("--B", sim_boot, "Bootstrap replications");
    sim_cmd->add_option("--alpha", sim_alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    sim_cmd->add_option("--kernel", sim_kernels, "Kernels to compare")
        ->delimiter(',')
        ->check(CLI::IsMember({"grb", "linear", "quadratic"}));
    sim_cmd->add_option("--null-reps", sim_null_reps, "Null-law Monte Carlo replications");
    sim_cmd->add_option("--bridge-grid", sim_bridge_grid, "Brownian-bridge grid size");
    sim_cmd->add_option("--fve", sim_fve, "Fraction of variance explained for choosing p");
    sim_cmd->add_option("--grid-size", grid_size, "Observation points per curve");
    sim_cmd->add_option("--n-basis", n_basis, "Fourier basis functions (odd)");
    sim_cmd->add_flag("--snr-squared", snr_squared, "Setting 1: square a in the SNR definition");
    sim_cmd->add_flag("--independent-null", independent_null, "Fresh null-law draws for every replicate");
    sim_cmd->add_flag("--timing", timing, "Add wall-clock runtimes (output no longer byte-reproducible)");
    sim_cmd->add_option("--csv", csv_path, "Write one row per replicate to this file");

    // null-quantile
    auto* nq_cmd = app.add_subcommand("null-quantile", "Critical value of the limiting null law");
    std::vector<double> theta;
    double nq_alpha = 0.05;
    int nq_reps = kDefaultNullReps;
    int nq_grid = kDefaultBridgeGrid;
    std::uint64_t nq_seed = kDefaultSeed;
    nq_cmd->add_option("--theta", theta, "Eigenvalues")->delimiter(',')->required();
    nq_cmd->add_option("--alpha", nq_alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
    nq_cmd->add_option("--reps", nq_reps, "Monte Carlo replications");
    nq_cmd->add_option("--bridge-grid", nq_grid, "Brownian-bridge grid size");
    nq_cmd->add_option("--seed", nq_seed, "Master seed");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "fdbreak: " << e.what() << '\n';
        return exit_code::usage;
    }

    if (threads == 0) {
        if (const char* env = std::getenv("FDBREAK_THREADS")) threads = std::atoi(env);
    }
    set_thread_count(threads);

    try {
        if (detect_cmd->parsed()) {
            const auto loaded = load_curves(detect_input);
            DetectConfig cfg;
            cfg.kernel = kernel_from_flags(detect_kernel.kernel, detect_kernel.gamma);
            cfg.alpha = detect_alpha;
            cfg.fve = detect_fve;
            cfg.rank_select = rank_select == "loocv" ? RankSelect::Loocv : RankSelect::Fve;
            if (manual_p > 0) {
                cfg.rank_select = RankSelect::Manual;
                cfg.p_manual = manual_p;
            }
            cfg.p_max = p_max;
            cfg.null_reps = null_reps;
            cfg.bridge_grid = bridge_grid;
            cfg.seed = detect_seed;
            const auto r = detect(loaded.curves, cfg);
            json flags = detect_kernel.to_json();
            flags.update({{"alpha", detect_alpha},
                          {"fve", detect_fve},
                          {"rank_select", manual_p > 0 ? "manual" : rank_select},
                          {"p", manual_p},
                          {"p_max", p_max},
                          {"null_reps", null_reps},
                          {"bridge_grid", bridge_grid}});
            const auto& ev = r.spectrum_used.eigenvalues;
            json doc{{"manifest", manifest("detect", flags, loaded.digest, detect_seed)},
                     {"n", loaded.curves.count()},
                     {"t_n", r.t_n},
                     {"critical_value", r.critical_value},
                     {"p_value", r.p_value},
                     {"reject", r.rejects(detect_alpha)},
                     {"k_hat", r.k_hat},
                     {"tau_hat", r.tau_hat},
                     {"degenerate", r.degenerate},
                     {"gamma_used", r.gamma_used},
                     {"p_selected", r.spectrum_used.p_selected},
                     {"eigenvalues", std::vector<double>(ev.data(), ev.data() + r.spectrum_used.p_selected)},
                     {"trace", r.trace.values}};
            out << doc.dump(2) << '\n';
            err << "T_n = " << r.t_n << ", critical value = " << r.critical_value << ", p = " << r.p_value
                << (r.rejects(detect_alpha) ? " (reject)" : " (no break detected)") << ", k_hat = " << r.k_hat
                << '\n';
            return exit_code::ok;
        }

        if (date_cmd->parsed()) {
            CusumTrace trace;
            std::optional<std::string> digest;
            json flags;
            if (!date_trace.empty()) {
                if (!date_input.empty()) throw ArgumentError("give either a curves file or --trace, not both");
                trace.values = trace_values(date_trace);
                for (double s : trace.values) {
                    if (s < 0.0) throw ArgumentError("--trace values must be non-negative");
                }
                flags = {{"trace", date_trace}};
            } else {
                if (date_input.empty()) throw ArgumentError("date needs a curves file or --trace");
                const auto loaded = load_curves(date_input);
                digest = loaded.digest;
                const auto k = gram(loaded.curves, kernel_from_flags(date_kernel.kernel, date_kernel.gamma));
                trace = cusum_trace(k);
                flags = date_kernel.to_json();
            }
            const int k_hat = break_date(trace);
            json doc{{"manifest", manifest("date", flags, digest, std::nullopt)},
                     {"k_hat", k_hat},
                     {"tau_hat", static_cast<double>(k_hat) / trace.n()},
                     {"degenerate", trace.flat()},
                     {"trace", trace.values}};
            out << doc.dump(2) << '\n';
            err << "k_hat = " << k_hat << " of n = " << trace.n() << '\n';
            return exit_code::ok;
        }

        if (ci_cmd->parsed()) {
            const auto loaded = load_curves(ci_input);
            const auto k = gram(loaded.curves, kernel_from_flags(ci_kernel.kernel, ci_kernel.gamma));
            const auto n = static_cast<int>(k.size());
            const int k_hat = break_date(cusum_trace(k));
            const double delta_sq = break_size_sq(k, k_hat);

            const auto interval_json = [](const BreakInterval& ci) {
                json j{{"method", to_string(ci.method)},
                       {"lower", ci.lower},
                       {"upper", ci.upper},
                       {"level", ci.level},
                       {"delta_norm_sq", ci.delta_norm_sq}};
                if (ci.sigma_sq) j["sigma_sq"] = *ci.sigma_sq;
                if (ci.bootstrap_reps) j["B"] = *ci.bootstrap_reps;
                return j;
            };
            std::vector<BreakInterval> intervals;
            if (ci_method == "bootstrap" || ci_method == "both") {
                intervals.push_back(bootstrap_ci(k, k_hat, boot_reps, ci_alpha, ci_seed));
            }
            if (ci_method == "asymptotic" || ci_method == "both") {
                LambdaSimConfig sim;
                sim.reps = lambda_reps;
                sim.x_range = x_range;
                sim.x_step = x_step;
                sim.seed = ci_seed;
                intervals.push_back(asymptotic_ci(n, k_hat, delta_sq, sigma_hat_sq(k, k_hat), ci_alpha, sim));
            }
            json flags = ci_kernel.to_json();
            flags.update({{"method", ci_method},
                          {"B", boot_reps},
                          {"alpha", ci_alpha},
                          {"lambda_reps", lambda_reps},
                          {"x_range", x_range},
                          {"x_step", x_step}});
            json doc{{"manifest", manifest("ci", flags, loaded.digest, ci_seed)},
                     {"k_hat", k_hat},
                     {"tau_hat", static_cast<double>(k_hat) / n},
                     {"delta_norm_sq", delta_sq}};
            if (intervals.size() == 1) {
                doc.update(interval_json(intervals.front()));
            } else {
                json list = json::array();
                for (const auto& ci : intervals) list.push_back(interval_json(ci));
                doc["intervals"] = std::move(list);
            }
            out << doc.dump(2) << '\n';
            for (const auto& ci : intervals) {
                err << to_string(ci.method) << " " << ci.level * 100 << "% interval for the break date: [" << ci.lower
                    << ", " << ci.upper << "] around k_hat = " << k_hat << '\n';
            }
            return exit_code::ok;
        }

        if (sim_cmd->parsed()) {
            ExperimentSpec spec;
            spec.cells.clear();
            for (int n : sim_n) {
                for (double tau : sim_tau) {
                    for (double param : sim_param) {
                        DgpConfig cell;
                        cell.setting = parse_setting(setting);
                        cell.n = n;
                        cell.tau_star = tau;
                        cell.param = param;
                        cell.grid_size = grid_size;
                        cell.n_basis = n_basis;
                        cell.snr_squared = snr_squared;
                        spec.cells.push_back(cell);
                    }
                }
            }
            spec.kernels.clear();
            for (const auto& name : sim_kernels) spec.kernels.push_back(KernelSpec{parse_kernel_family(name), {}});
            spec.reps = sim_reps;
            spec.alpha = sim_alpha;
            spec.ci_alpha = sim_alpha;
            spec.seed = sim_seed;
            spec.detect = !sim_no_detect;
            spec.coverage = sim_coverage;
            spec.bootstrap_reps = sim_boot;
            spec.null_reps = sim_null_reps;
            spec.bridge_grid = sim_bridge_grid;
            spec.fve = sim_fve;
            spec.shared_null = !independent_null;
            spec.timing = timing;
            const auto report = run_experiment(spec);

            json flags{{"setting", setting},
                       {"n", sim_n},
                       {"tau_star", sim_tau},
                       {"param", sim_param},
                       {"reps", sim_reps},
                       {"coverage", sim_coverage},
                       {"detect", !sim_no_detect},
                       {"B", sim_boot},
                       {"alpha", sim_alpha},
                       {"kernel", sim_kernels},
                       {"null_reps", sim_null_reps},
                       {"bridge_grid", sim_bridge_grid},
                       {"fve", sim_fve},
                       {"grid_size", grid_size},
                       {"n_basis", n_basis},
                       {"snr_squared", snr_squared},
                       {"independent_null", independent_null},
                       {"timing", timing}};
            json doc = to_json(report);
            doc["manifest"] = manifest("simulate", flags, std::nullopt, sim_seed);
            out << doc.dump(2) << '\n';
            if (!csv_path.empty()) {
                std::ofstream csv(csv_path);
                if (!csv) throw DataError("cannot write '" + csv_path + "'");
                write_tidy_csv(csv, report);
            }
            for (const auto& cell : report.cells) {
                err << "setting " << static_cast<int>(cell.config.setting) << " n=" << cell.config.n
                    << " tau*=" << cell.config.tau_star << " param=" << cell.config.param << " [" << cell.kernel
                    << "]";
                if (cell.rejection_rate) err << " rejection rate " << *cell.rejection_rate;
                if (cell.coverage) err << " coverage " << *cell.coverage;
                err << " mean k_hat " << cell.mean_k_hat << '\n';
            }
            return exit_code::ok;
        }

        if (nq_cmd->parsed()) {
            const auto sample = simulate_null(theta, nq_reps, nq_grid, nq_seed);
            const double crit = critical_value(sample, nq_alpha);
            json flags{{"theta", theta}, {"alpha", nq_alpha}, {"reps", nq_reps}, {"bridge_grid", nq_grid}};
            json doc{{"manifest", manifest("null-quantile", flags, std::nullopt, nq_seed)},
                     {"alpha", nq_alpha},
                     {"critical_value", crit}};
            out << doc.dump(2) << '\n';
            err << "critical value at alpha = " << nq_alpha << ": " << crit << '\n';
            return exit_code::ok;
        }
    } catch (const ArgumentError& e) {
        err << "fdbreak: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const DegenerateDataError& e) {
        err << "fdbreak: degenerate data: " << e.what() << '\n';
        return exit_code::degenerate;
    } catch (const DataError& e) {
        err << "fdbreak: data error: " << e.what() << '\n';
        return exit_code::data;
    } catch (const DimensionError& e) {
        err << "fdbreak: data error: " << e.what() << '\n';
        return exit_code::data;
    } catch (const std::exception& e) {
        err << "fdbreak: " << e.what() << '\n';
        return exit_code::failure;
    }
    err << "fdbreak: no subcommand\n";
    return exit_code::usage;
}

}  // namespace fdbreak
