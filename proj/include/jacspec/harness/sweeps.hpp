#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jacspec/conditions.hpp"
#include "jacspec/diagnostics.hpp"
#include "jacspec/ensembles.hpp"
#include "jacspec/harness/config.hpp"
#include "jacspec/harness/csv.hpp"
#include "jacspec/harness/executor.hpp"
#include "jacspec/harness/manifest.hpp"
#include "jacspec/network.hpp"
#include "jacspec/pruning.hpp"
#include "jacspec/streams.hpp"

namespace jacspec::harness {

struct SweepOptions {
    bool resume = false;
    bool record_timing = false;
    /// Stop after this many new rows, leaving a resumable partial run.
    std::optional<std::size_t> stop_after;
    std::ostream* log = nullptr;
};

/// One (grid point, seed) task of a sweep.
struct GridPoint {
    double sigma_w2 = 2.0;
    std::optional<std::size_t> pruning;  // index into config.pruning
    double eta = 0.0;
    std::size_t depth = 0;
    std::uint64_t seed = 0;
};

/// Grid in row order: sigma_w2 ascending, then pruning entries in config
/// order (PruneSweep) or eta ascending (CorrSweep), then L, then seed.
inline std::vector<GridPoint> expand_grid(const ExperimentConfig& c) {
    std::vector<GridPoint> grid;
    auto sigmas = c.sigma_w2;
    std::stable_sort(sigmas.begin(), sigmas.end());
    const auto add_depths = [&](GridPoint base) {
        for (auto L : c.depths) {
            for (std::uint64_t s = 0; s < c.seeds; ++s) {
                base.depth = L;
                base.seed = s;
                grid.push_back(base);
            }
        }
    };
    switch (c.kind) {
        case ExperimentKind::DepthSweep:
            for (double sw : sigmas) add_depths({sw, std::nullopt, 0.0, 0, 0});
            break;
        case ExperimentKind::PruneSweep:
            for (double sw : sigmas)
                for (std::size_t p = 0; p < c.pruning.size(); ++p) add_depths({sw, p, 0.0, 0, 0});
            break;
        case ExperimentKind::CorrSweep: {
            auto etas = c.eta;
            std::stable_sort(etas.begin(), etas.end());
            for (double e : etas) add_depths({2.0, std::nullopt, e, 0, 0});
            break;
        }
        default:
            throw ConfigError(to_string(c.kind) + " is not a row-per-seed sweep");
    }
    return grid;
}

/// Input vectors: a fixed file, or one synthetic x per seed index.
class InputSource {
public:
    explicit InputSource(const ExperimentConfig& c) : master_seed_(c.master_seed) {
        if (c.input == "synthetic") {
            dim_ = c.effective_input_dim();
        } else {
            fixed_ = load_input_vector(c.input, c.input_dim);
            dim_ = fixed_->size();
            if (dim_ == 0) throw ConfigError("input file " + c.input + " is empty");
        }
    }

    std::size_t dim() const noexcept { return dim_; }

    std::vector<double> for_seed(std::uint64_t seed) const {
        if (fixed_) return *fixed_;
        auto rng = StreamPlan{master_seed_, seed, 0}.input_stream();
        return synthetic_input(rng, dim_);
    }

private:
    std::uint64_t master_seed_;
    std::size_t dim_ = 0;
    std::optional<std::vector<double>> fixed_;
};

struct RunRecord {
    SweepRow row;
    /// Per-run details for the manifest (mask scales for pruning sweeps).
    nlohmann::json info = nlohmann::json::object();
};

inline EnsembleSpec ensemble_for(const ExperimentConfig& c, const GridPoint& p) {
    if (c.kind == ExperimentKind::CorrSweep) return {CorrelatedEnsemble{p.eta, c.normalize_variance}, c.n};
    return {IidEnsemble{p.sigma_w2}, c.n};
}

/// Computes one row. Streams depend on (master_seed, seed, L, layer) only.
inline RunRecord evaluate_point(const ExperimentConfig& c, const InputSource& input, const GridPoint& p,
                                bool record_timing) {
    const auto t0 = std::chrono::steady_clock::now();
    const MlpConfig mc{input.dim(), c.n, p.depth, c.output_dim};
    const StreamPlan plan{c.master_seed, p.seed, p.depth};
    auto weights = sample_network(mc, ensemble_for(c, p), plan);

    RunRecord rec;
    SweepRow& row = rec.row;
    row.experiment_id = c.experiment_id;
    row.kind = to_string(c.kind);
    row.seed = p.seed;
    row.n = c.n;
    row.depth = p.depth;
    row.sigma_w2 = p.sigma_w2;
    row.eta = p.eta;
    row.k = c.k;

    if (p.pruning) {
        const auto& entry = c.pruning[*p.pruning];
        row.method = entry.spec.method_name();
        row.sparsity = entry.sparsity;
        row.scaling_mode = to_string(entry.spec.scaling);
        double scale_sum = 0.0, analytic_sum = 0.0, calibrated_sum = 0.0, ratio_sum = 0.0, kept_sum = 0.0;
        std::optional<std::string> warning;
        for (std::size_t l = 1; l <= p.depth; ++l) {
            auto rng = plan.stream(StreamRole::Mask, l);
            auto res = make_mask(entry.spec, rng, weights.hidden[l - 1]);
            scale_sum += res.mask.scale;
            analytic_sum += res.report.analytic;
            calibrated_sum += res.report.calibrated;
            ratio_sum += res.report.ratio;
            kept_sum += res.mask.kept_fraction();
            if (res.report.warning && !warning) warning = res.report.warning;
            weights.masks.push_back(std::move(res.mask));
        }
        const double L = static_cast<double>(p.depth);
        row.scale_value = scale_sum / L;
        rec.info = {{"analytic", analytic_sum / L},
                    {"calibrated", calibrated_sum / L},
                    {"ratio", ratio_sum / L},
                    {"kept_fraction", kept_sum / L}};
        if (warning) rec.info["warning"] = *warning;
    }

    try {
        const auto x = input.for_seed(p.seed);
        const auto est = jacobian_log_norm_estimate(mc, weights, x, c.k);
        row.log_jac_norm = est.log_norm;
        row.converged = est.converged;
    } catch (const OverflowError& e) {
        row.log_jac_norm = std::numeric_limits<double>::quiet_NaN();
        row.converged = false;
        rec.info["overflow_layer"] = e.layer();
    }
    if (record_timing) {
        const auto dt = std::chrono::steady_clock::now() - t0;
        row.wall_time_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(dt).count());
    }
    return rec;
}

struct SweepResult {
    std::size_t rows = 0;
    bool complete = false;
    nlohmann::json manifest;
};

namespace detail {

inline std::filesystem::path with_suffix(const std::filesystem::path& p, const char* suffix) {
    auto q = p;
    q += suffix;
    return q;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Complete ('\n'-terminated) lines of `text`.
inline std::vector<std::string> complete_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find('\n', start);
        if (pos == std::string::npos) break;
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

}  // namespace detail

/// Runs a DepthSweep, PruneSweep or CorrSweep and writes `out` plus its manifest.
///
/// Rows stream into `out`.partial (with per-row details in `out`.partial.jsonl)
/// in grid order; the final CSV and manifest are renamed into place only when
/// every row exists. With `resume`, complete rows of a matching partial run
/// are kept and only the missing tail is computed.
inline SweepResult run_sweep(const ExperimentConfig& c, const std::filesystem::path& out,
                             const SweepOptions& opt = {}) {
    const auto grid = expand_grid(c);
    const InputSource input(c);
    const std::string echo = to_toml(c);
    const auto partial = detail::with_suffix(out, ".partial");
    const auto partial_info = detail::with_suffix(out, ".partial.jsonl");
    const std::string started_at = utc_timestamp();

    std::size_t start = 0;
    std::vector<std::string> kept_rows, kept_info;
    if (opt.resume && std::filesystem::exists(partial) && std::filesystem::exists(partial_info)) {
        const auto rows = detail::complete_lines(detail::read_text(partial));
        const auto infos = detail::complete_lines(detail::read_text(partial_info));
        if (rows.empty() || rows.front() != kCsvHeader || infos.empty()) {
            throw IoError(partial.string() + " is not a resumable partial sweep");
        }
        const auto head = nlohmann::json::parse(infos.front(), nullptr, false);
        if (head.is_discarded() || !head.contains("config_toml") || head["config_toml"] != echo) {
            throw ConfigError(partial.string() + " was written by a different config; refusing to resume");
        }
        start = std::min(rows.size() - 1, infos.size() - 1);
        kept_rows.assign(rows.begin() + 1, rows.begin() + 1 + static_cast<std::ptrdiff_t>(start));
        kept_info.assign(infos.begin() + 1, infos.begin() + 1 + static_cast<std::ptrdiff_t>(start));
        if (opt.log) *opt.log << "resuming " << c.experiment_id << " at row " << start << " of " << grid.size() << "\n";
    }

    std::filesystem::create_directories(std::filesystem::absolute(out).parent_path());
    {
        // Rewrite the kept prefix so a torn last line from an interrupted run is dropped.
        std::ofstream csv(partial, std::ios::binary | std::ios::trunc);
        std::ofstream info(partial_info, std::ios::binary | std::ios::trunc);
        if (!csv || !info) throw IoError("cannot write " + partial.string());
        csv << kCsvHeader << '\n';
        for (const auto& r : kept_rows) csv << r << '\n';
        info << nlohmann::json{{"config_toml", echo}}.dump() << '\n';
        for (const auto& r : kept_info) info << r << '\n';
    }

    std::ofstream csv(partial, std::ios::binary | std::ios::app);
    std::ofstream info(partial_info, std::ios::binary | std::ios::app);
    std::size_t written = 0;
    const std::function<RunRecord(std::size_t)> task = [&](std::size_t i) {
        return evaluate_point(c, input, grid[i], opt.record_timing);
    };
    const std::function<bool(std::size_t, RunRecord&)> sink = [&](std::size_t i, RunRecord& rec) {
        csv << format_row(rec.row) << '\n';
        csv.flush();
        info << rec.info.dump() << '\n';
        info.flush();
        if (!csv || !info) throw IoError("write failed for " + partial.string());
        ++written;
        if (opt.log && (i + 1) % 50 == 0) *opt.log << "  " << (i + 1) << "/" << grid.size() << " rows\n";
        return !(opt.stop_after && written >= *opt.stop_after);
    };
    run_ordered<RunRecord>(start, grid.size(), c.threads, task, sink);
    csv.close();
    info.close();

    SweepResult result;
    result.rows = start + written;
    if (result.rows < grid.size()) {
        if (opt.log) *opt.log << "stopped after " << result.rows << " of " << grid.size() << " rows; rerun with --resume\n";
        return result;
    }

    auto manifest = make_manifest(c, out, grid.size(), started_at);
    manifest["timing_recorded"] = opt.record_timing;
    manifest["resumed_from_row"] = start;
    if (c.kind == ExperimentKind::PruneSweep) {
        nlohmann::json runs = nlohmann::json::array();
        const auto infos = detail::complete_lines(detail::read_text(partial_info));
        for (std::size_t i = 1; i < infos.size(); ++i) {
            auto j = nlohmann::json::parse(infos[i]);
            j["row"] = i - 1;
            runs.push_back(std::move(j));
        }
        manifest["runs"] = std::move(runs);
    }
    write_atomically(out, detail::read_text(partial));
    write_manifest(out, manifest);
    std::filesystem::remove(partial);
    std::filesystem::remove(partial_info);
    result.complete = true;
    result.manifest = std::move(manifest);
    return result;
}

// ---------------------------------------------------------------------------
// Approximation checks: indicator statistics at one layer across many seeds.

inline constexpr std::string_view kApproxCsvHeader =
    "experiment_id,kind,seed,n,L,l,d_fraction,t_w,t_d,t_d_input";
inline constexpr std::string_view kPairsCsvHeader = "pair,i,j,n11,n10,n01,n00,chi2,p_value";

struct ApproxSeed {
    double t_w = 0.0;        // fraction of positive entries of W_l
    double t_d = 0.0;        // fraction of ones in D_l
    double t_d_input = 0.0;  // fraction of ones in D_{l-1}, the pattern W_l acts on
    std::vector<std::uint8_t> d;  // D_l
};

struct ApproxPair {
    std::size_t i = 0, j = 0;
    ContingencyTable2x2 table;
    std::optional<ChiSquaredResult> chi2;  // empty when a marginal is zero
};

struct ApproxReport {
    std::size_t n = 0, depth = 0, layer = 0, seeds = 0;
    double pooled_fraction = 0.0;
    double min_entry_fraction = 0.0, max_entry_fraction = 0.0;
    std::vector<ApproxPair> pairs;
    std::vector<double> p_values;
    KsResult ks;
    double corr_tw_td = 0.0;
    double corr_tw_td_input = 0.0;
    std::vector<ApproxSeed> per_seed;
};

/// Network of depth `layer` whose layers coincide with the first `layer`
/// layers of the depth-L network (streams are keyed by the full L).
inline ApproxSeed approx_seed(const ExperimentConfig& c, const InputSource& input, std::uint64_t seed) {
    const std::size_t L = c.depths.front();
    const MlpConfig mc{input.dim(), c.n, c.layer, 0};
    const StreamPlan plan{c.master_seed, seed, L};
    const auto weights = sample_network(mc, {IidEnsemble{c.sigma_w2.front()}, c.n}, plan);
    const auto trace = forward(mc, weights, input.for_seed(seed));
    const auto stats = activation_weight_stats(weights.hidden[c.layer - 1], trace, c.layer);
    ApproxSeed out;
    out.t_w = stats.t_w;
    out.t_d = stats.t_d;
    const auto& prev = trace.indicators[c.layer - 1];
    double ones = 0.0;
    for (double v : prev) ones += v;
    out.t_d_input = ones / static_cast<double>(prev.size());
    const auto& d = trace.indicators[c.layer];
    out.d.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out.d[i] = d[i] != 0.0;
    return out;
}

/// Distinct unordered entry pairs (i < j), drawn from the PairSelect stream.
inline std::vector<std::pair<std::size_t, std::size_t>> select_pairs(const ExperimentConfig& c) {
    auto rng = StreamPlan{c.master_seed, 0, c.depths.front()}.stream(StreamRole::PairSelect);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    while (out.size() < c.pairs) {
        auto i = static_cast<std::size_t>(rng.below(c.n));
        auto j = static_cast<std::size_t>(rng.below(c.n));
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        if (seen.insert({i, j}).second) out.push_back({i, j});
    }
    return out;
}

inline ApproxReport run_approx_verification(const ExperimentConfig& c) {
    if (c.kind != ExperimentKind::ApproxVerify) throw ConfigError("run_approx_verification needs kind ApproxVerify");
    const InputSource input(c);
    ApproxReport rep;
    rep.n = c.n;
    rep.depth = c.depths.front();
    rep.layer = c.layer;
    rep.seeds = c.seeds;
    rep.per_seed.resize(c.seeds);
    const std::function<ApproxSeed(std::size_t)> task = [&](std::size_t s) { return approx_seed(c, input, s); };
    const std::function<bool(std::size_t, ApproxSeed&)> sink = [&](std::size_t s, ApproxSeed& r) {
        rep.per_seed[s] = std::move(r);
        return true;
    };
    run_ordered<ApproxSeed>(0, c.seeds, c.threads, task, sink);

    std::vector<double> entry(c.n, 0.0);
    for (const auto& s : rep.per_seed)
        for (std::size_t i = 0; i < c.n; ++i) entry[i] += s.d[i];
    double total = 0.0;
    for (auto& f : entry) {
        total += f;
        f /= static_cast<double>(c.seeds);
    }
    rep.pooled_fraction = total / (static_cast<double>(c.seeds) * static_cast<double>(c.n));
    rep.min_entry_fraction = *std::min_element(entry.begin(), entry.end());
    rep.max_entry_fraction = *std::max_element(entry.begin(), entry.end());

    for (const auto& [i, j] : select_pairs(c)) {
        ApproxPair p{i, j, {}, std::nullopt};
        for (const auto& s : rep.per_seed) p.table.add(s.d[i] != 0, s.d[j] != 0);
        try {
            p.chi2 = chi2_independence(p.table);
            rep.p_values.push_back(p.chi2->p_value);
        } catch (const DomainError&) {
        }
        rep.pairs.push_back(p);
    }
    if (!rep.p_values.empty()) rep.ks = ks_uniform(rep.p_values);

    std::vector<double> tw, td, tdi;
    for (const auto& s : rep.per_seed) {
        tw.push_back(s.t_w);
        td.push_back(s.t_d);
        tdi.push_back(s.t_d_input);
    }
    rep.corr_tw_td = pearson_corr(tw, td);
    rep.corr_tw_td_input = pearson_corr(tw, tdi);
    return rep;
}

inline nlohmann::json approx_summary(const ApproxReport& r) {
    std::size_t skipped = 0;
    for (const auto& p : r.pairs) skipped += p.chi2 ? 0 : 1;
    return {{"n", r.n},
            {"L", r.depth},
            {"layer", r.layer},
            {"seeds", r.seeds},
            {"pooled_d_fraction", r.pooled_fraction},
            {"min_entry_fraction", r.min_entry_fraction},
            {"max_entry_fraction", r.max_entry_fraction},
            {"pairs", r.pairs.size()},
            {"pairs_with_zero_marginal", skipped},
            {"ks_statistic", r.ks.statistic},
            {"ks_p_value", r.ks.p_value},
            {"corr_tw_td", r.corr_tw_td},
            {"corr_tw_td_input", r.corr_tw_td_input}};
}

/// Writes the per-seed table to `out`, the pair table to `out`.pairs.csv and the manifest.
inline void write_approx_outputs(const ExperimentConfig& c, const ApproxReport& r,
                                 const std::filesystem::path& out, const std::string& started_at) {
    std::string body(kApproxCsvHeader);
    body += '\n';
    for (std::size_t s = 0; s < r.per_seed.size(); ++s) {
        const auto& x = r.per_seed[s];
        double ones = 0.0;
        for (auto v : x.d) ones += v;
        body += c.experiment_id + ",ApproxVerify," + std::to_string(s) + ',' + std::to_string(r.n) + ',' +
                std::to_string(r.depth) + ',' + std::to_string(r.layer) + ',' +
                format_double(ones / static_cast<double>(x.d.size())) + ',' + format_double(x.t_w) + ',' +
                format_double(x.t_d) + ',' + format_double(x.t_d_input) + '\n';
    }
    std::string pairs(kPairsCsvHeader);
    pairs += '\n';
    for (std::size_t k = 0; k < r.pairs.size(); ++k) {
        const auto& p = r.pairs[k];
        pairs += std::to_string(k) + ',' + std::to_string(p.i) + ',' + std::to_string(p.j) + ',' +
                 std::to_string(p.table.a) + ',' + std::to_string(p.table.b) + ',' + std::to_string(p.table.c) +
                 ',' + std::to_string(p.table.d) + ',' + (p.chi2 ? format_double(p.chi2->chi2) : "nan") + ',' +
                 (p.chi2 ? format_double(p.chi2->p_value) : "nan") + '\n';
    }
    std::filesystem::create_directories(std::filesystem::absolute(out).parent_path());
    write_atomically(out, body);
    write_atomically(detail::with_suffix(out, ".pairs.csv"), pairs);
    auto manifest = make_manifest(c, out, r.per_seed.size(), started_at);
    manifest["pairs_output"] = detail::with_suffix(out, ".pairs.csv").filename().string();
    manifest["summary"] = approx_summary(r);
    write_manifest(out, manifest);
}

// ---------------------------------------------------------------------------
// Stability-condition diagnostics for each configured pruning entry.

struct ConditionResult {
    std::string label;
    ConditionReport report;
};

inline std::vector<ConditionResult> run_condition_check(const ExperimentConfig& c) {
    if (c.kind != ExperimentKind::ConditionCheck) throw ConfigError("run_condition_check needs kind ConditionCheck");
    std::vector<PruningEntry> entries = c.pruning;
    if (entries.empty()) entries.push_back({PruningSpec{RandomPruning{0.0}, ScalingMode::None}, 0.0});
    const std::size_t n = c.n;
    const double sw = c.sigma_w2.front();
    const WeightSampler weights = [n, sw](RngStream& rng) {
        return sample_gaussian_matrix(rng, n, n, sw / static_cast<double>(n));
    };
    std::vector<ConditionResult> out(entries.size());
    const std::function<ConditionResult(std::size_t)> task = [&](std::size_t e) {
        const PruningSpec spec = entries[e].spec;
        const MaskSampler masks = [spec](RngStream& rng, const DenseMatrix& w) {
            return make_mask(spec, rng, w).mask;
        };
        return ConditionResult{spec.method_name() + " " + pruning_parameter(entries[e]) + " scaling=" +
                                   to_string(spec.scaling),
                               check_stability_conditions(weights, masks, n, c.samples, c.master_seed)};
    };
    const std::function<bool(std::size_t, ConditionResult&)> sink = [&](std::size_t e, ConditionResult& r) {
        out[e] = std::move(r);
        return true;
    };
    run_ordered<ConditionResult>(0, entries.size(), c.threads, task, sink);
    return out;
}

inline nlohmann::json to_json(const ConditionEstimate& e) {
    return {{"value", e.value}, {"std_error", e.std_error}, {"naive_max", e.naive_max}, {"selected_index", e.selected_index}};
}

inline nlohmann::json to_json(const ConditionResult& r) {
    return {{"entry", r.label},
            {"n", r.report.n},
            {"samples", r.report.samples},
            {"beta_n", r.report.beta_n},
            {"growth", to_json(r.report.growth)},
            {"second_moment", to_json(r.report.second_moment)},
            {"pooled_second_moment", to_json(r.report.pooled_second_moment)},
            {"mean", to_json(r.report.mean)},
            {"mask_second_moment", to_json(r.report.mask_second_moment)}};
}

}  // namespace jacspec::harness
