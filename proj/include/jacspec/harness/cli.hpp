#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jacspec/diagnostics.hpp"
#include "jacspec/harness/config.hpp"
#include "jacspec/harness/csv.hpp"
#include "jacspec/harness/manifest.hpp"
#include "jacspec/harness/sweeps.hpp"
#include "jacspec/pruning.hpp"

namespace jacspec::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Short human-readable real: 6 significant digits, and always a decimal
/// point so integers read as reals ("2.0").
inline std::string human_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    std::string s = buf;
    if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
    return s;
}

namespace detail {

struct GlobalFlags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t threads = 1;
    bool quiet = false;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

/// Loads the config and applies --seed, --out, --threads and JACSPEC_THREADS,
/// in increasing order of precedence.
inline ExperimentConfig effective_config(const GlobalFlags& g, ExperimentKind kind) {
    if (g.config.empty()) throw ConfigError("--config <path> is required");
    auto c = load_config(g.config, kind);
    if (g.seed_opt->count() > 0) c.master_seed = g.seed;
    if (g.out_opt->count() > 0) c.out_path = g.out;
    if (g.threads_opt->count() > 0) c.threads = g.threads;
    if (const char* env = std::getenv("JACSPEC_THREADS"); env && *env) {
        try {
            const long v = std::stol(env);
            if (v < 1) throw ConfigError("");
            c.threads = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("JACSPEC_THREADS must be a positive integer, got '" + std::string(env) + "'");
        }
    }
    if (c.threads == 0) throw ConfigError("--threads must be >= 1");
    if (c.out_path.empty()) {
        c.out_path = c.experiment_id + (kind == ExperimentKind::ConditionCheck ? ".json" : ".csv");
    }
    return c;
}

inline int run_fit(const std::string& csv_path, double min_depth, double max_depth, double epsilon,
                   std::ostream& out, std::ostream& err) {
    const auto rows = read_csv(csv_path);
    if (rows.empty()) throw IoError(csv_path + " has no rows");
    bool any = false;
    for (const auto& g : group_means(rows)) {
        out << "group: " << g.key.label() << "\n";
        if (g.non_finite_rows > 0) out << "  non_finite_rows=" << g.non_finite_rows << "\n";
        try {
            const auto fit = fit_growth_rate(g.points, {min_depth, max_depth});
            const auto verdict = classify_stability(fit, epsilon);
            out << "  points=" << fit.points << " slope=" << human_double(fit.slope)
                << " intercept=" << human_double(fit.intercept) << " residual_rms=" << human_double(fit.residual_rms)
                << " verdict=" << to_string(verdict.verdict) << "\n";
            any = true;
        } catch (const DomainError& e) {
            out << "  no fit: " << e.what() << "\n";
        }
    }
    if (!any) {
        err << "fit: no group had enough depths inside [" << human_double(min_depth) << ", "
            << human_double(max_depth) << "]\n";
        return kExitRuntime;
    }
    return kExitOk;
}

struct ScaleFactorArgs {
    std::string method;
    double s = -1.0, t = -1.0, c = 0.0;
    std::size_t r = 0, n = 256;
    CLI::Option *s_opt = nullptr, *t_opt = nullptr, *r_opt = nullptr, *c_opt = nullptr;
};

inline int run_scale_factor(const ScaleFactorArgs& a, std::uint64_t seed, std::ostream& out) {
    if (a.n < 2) throw ConfigError("--n must be >= 2");
    PruningSpec spec;
    std::string param;
    if (a.method == "random") {
        if (a.s_opt->count() == 0) throw ConfigError("random pruning needs --s");
        if (!(a.s >= 0.0 && a.s < 1.0)) throw ConfigError("--s must lie in [0, 1)");
        spec.method = RandomPruning{a.s};
        param = "s=" + human_double(a.s);
    } else if (a.method == "magnitude_threshold") {
        if (a.t_opt->count() == 0 || !(a.t > 0.0)) throw ConfigError("magnitude_threshold needs --t > 0");
        spec.method = MagnitudeThreshold{a.t};
        param = "t=" + human_double(a.t);
    } else if (a.method == "magnitude_top_r") {
        std::size_t r = a.r;
        if (a.s_opt->count() > 0) {
            if (!(a.s >= 0.0 && a.s < 1.0)) throw ConfigError("--s must lie in [0, 1)");
            r = top_r_from_sparsity(a.n, a.s);
        } else if (a.c_opt->count() > 0) {
            r = top_r_from_exponent(a.n, a.c);
        } else if (a.r_opt->count() == 0) {
            throw ConfigError("magnitude_top_r needs --r, --s or --c");
        }
        if (r == 0 || r > a.n * a.n) throw ConfigError("r must lie in [1, n^2]");
        spec.method = MagnitudeTopR{r};
        param = "r=" + std::to_string(r);
    } else {
        throw ConfigError("--method must be random, magnitude_threshold or magnitude_top_r");
    }
    // The calibrated scale depends on the weights, so it is measured on one
    // critical N(0, 2/n) draw.
    const StreamPlan plan{seed, 0, 1};
    auto wrng = plan.stream(StreamRole::Hidden, 1);
    const auto w = sample_gaussian_matrix(wrng, a.n, a.n, 2.0 / static_cast<double>(a.n));
    auto mrng = plan.stream(StreamRole::Mask, 1);
    const auto res = make_mask(spec, mrng, w);
    out << "method=" << spec.method_name() << " n=" << a.n << " " << param << "\n";
    if (!std::holds_alternative<RandomPruning>(spec.method)) out << "threshold=" << human_double(res.threshold) << "\n";
    out << "analytic_scale=" << human_double(res.report.analytic) << "\n";
    out << "calibrated_scale=" << human_double(res.report.calibrated) << "\n";
    out << "ratio=" << human_double(res.report.ratio) << "\n";
    out << "kept_fraction=" << human_double(res.mask.kept_fraction()) << "\n";
    if (res.report.warning) out << "warning: " << *res.report.warning << "\n";
    return kExitOk;
}

}  // namespace detail

/// Entry point of the `jacspec` tool. Exit codes: 0 success, 1 usage or
/// config error, 2 runtime error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Jacobian spectral-norm experiments for deep ReLU networks", "jacspec"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(JACSPEC_VERSION));

    detail::GlobalFlags g;
    app.add_option("--config", g.config, "Experiment config (TOML, or a .manifest.json to rerun)");
    g.seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides master_seed)");
    g.out_opt = app.add_option("--out", g.out, "Output path (overrides out)");
    g.threads_opt = app.add_option("--threads", g.threads, "Worker threads; JACSPEC_THREADS takes precedence");
    app.add_flag("--quiet", g.quiet, "No progress output");

    SweepOptions sweep_opts;
    std::size_t stop_after = 0;
    const auto add_sweep = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_flag("--resume", sweep_opts.resume, "Continue an interrupted run of the same config");
        sub->add_flag("--record-timing", sweep_opts.record_timing, "Fill wall_time_ms (rows stop being reproducible)");
        sub->add_option("--stop-after", stop_after, "Stop after this many new rows (leaves a resumable run)");
        return sub;
    };
    auto* sweep = add_sweep("sweep", "Depth sweep of i.i.d. networks over sigma_w2");
    auto* prune = add_sweep("prune-sweep", "Depth sweep of pruned critical networks");
    auto* corr = add_sweep("corr-sweep", "Depth sweep of networks with correlated weights");
    auto* approx = app.add_subcommand("verify-approx", "Bernoulli, chi-squared and T_W/T_D checks of the indicator model");
    auto* cond = app.add_subcommand("check-conditions", "Monte Carlo checks of the stability-theorem conditions");

    auto* fit = app.add_subcommand("fit", "Fit growth rates per group of a sweep CSV");
    std::string fit_csv;
    double min_depth = 20.0, max_depth = std::numeric_limits<double>::infinity();
    double epsilon = kDefaultStabilityEpsilon;
    fit->add_option("csv", fit_csv, "Sweep CSV")->required();
    fit->add_option("--min-depth", min_depth, "Smallest depth used in the fit");
    fit->add_option("--max-depth", max_depth, "Largest depth used in the fit");
    fit->add_option("--epsilon", epsilon, "Stable band half-width in nats per layer");

    auto* scale = app.add_subcommand("scale-factor", "Analytic and calibrated mask scales for one pruning spec");
    detail::ScaleFactorArgs sf;
    scale->add_option("--method", sf.method, "random | magnitude_threshold | magnitude_top_r")->required();
    sf.s_opt = scale->add_option("--s", sf.s, "Sparsity");
    sf.t_opt = scale->add_option("--t", sf.t, "Magnitude threshold");
    sf.r_opt = scale->add_option("--r", sf.r, "Weights kept (top-r)");
    sf.c_opt = scale->add_option("--c", sf.c, "Top-r exponent: r = ceil(n (ln n)^c)");
    scale->add_option("--n", sf.n, "Width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitConfig;
    }
    if (stop_after > 0) sweep_opts.stop_after = stop_after;
    sweep_opts.log = g.quiet ? nullptr : &err;

    try {
        if (sweep->parsed() || prune->parsed() || corr->parsed()) {
            const auto kind = sweep->parsed()   ? ExperimentKind::DepthSweep
                              : prune->parsed() ? ExperimentKind::PruneSweep
                                                : ExperimentKind::CorrSweep;
            const auto c = detail::effective_config(g, kind);
            const auto res = run_sweep(c, c.out_path, sweep_opts);
            if (!g.quiet && res.complete) err << "wrote " << res.rows << " rows to " << c.out_path << "\n";
            return kExitOk;
        }
        if (approx->parsed()) {
            const auto c = detail::effective_config(g, ExperimentKind::ApproxVerify);
            const std::string started = utc_timestamp();
            const auto rep = run_approx_verification(c);
            write_approx_outputs(c, rep, c.out_path, started);
            if (!g.quiet) out << approx_summary(rep).dump(2) << "\n";
            return kExitOk;
        }
        if (cond->parsed()) {
            const auto c = detail::effective_config(g, ExperimentKind::ConditionCheck);
            const std::string started = utc_timestamp();
            const auto results = run_condition_check(c);
            nlohmann::json report = make_manifest(c, c.out_path, results.size(), started);
            report["results"] = nlohmann::json::array();
            for (const auto& r : results) report["results"].push_back(to_json(r));
            std::filesystem::create_directories(std::filesystem::absolute(c.out_path).parent_path());
            write_atomically(c.out_path, report.dump(2) + "\n");
            if (!g.quiet) out << report["results"].dump(2) << "\n";
            return kExitOk;
        }
        if (fit->parsed()) return detail::run_fit(fit_csv, min_depth, max_depth, epsilon, out, err);
        if (scale->parsed()) return detail::run_scale_factor(sf, g.seed, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << app.help();
    return kExitConfig;
}

}  // namespace jacspec::harness
