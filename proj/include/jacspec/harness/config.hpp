#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "jacspec/error.hpp"
#include "jacspec/matrix_io.hpp"
#include "jacspec/pruning.hpp"
#include "jacspec/special_functions.hpp"

namespace jacspec::harness {

enum class ExperimentKind { DepthSweep, PruneSweep, CorrSweep, ApproxVerify, ConditionCheck };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::DepthSweep: return "DepthSweep";
        case ExperimentKind::PruneSweep: return "PruneSweep";
        case ExperimentKind::CorrSweep: return "CorrSweep";
        case ExperimentKind::ApproxVerify: return "ApproxVerify";
        case ExperimentKind::ConditionCheck: return "ConditionCheck";
    }
    return "DepthSweep";
}

/// Accepts "DepthSweep" and "depth_sweep" spellings.
inline ExperimentKind parse_kind(std::string s) {
    std::string flat;
    for (char c : s)
        if (c != '_' && c != '-') flat += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (flat == "depthsweep") return ExperimentKind::DepthSweep;
    if (flat == "prunesweep") return ExperimentKind::PruneSweep;
    if (flat == "corrsweep") return ExperimentKind::CorrSweep;
    if (flat == "approxverify") return ExperimentKind::ApproxVerify;
    if (flat == "conditioncheck") return ExperimentKind::ConditionCheck;
    throw ConfigError("unknown kind '" + s + "'");
}

/// One fully expanded pruning grid entry.
struct PruningEntry {
    PruningSpec spec;
    /// Nominal fraction removed: s for random, 1 - r/n² for top-r, and
    /// P(|w| ≤ t) under N(0, 2/n) for a fixed threshold.
    double sparsity = 0.0;
};

struct ExperimentConfig {
    std::string experiment_id = "experiment";
    ExperimentKind kind = ExperimentKind::DepthSweep;
    std::size_t n = 0;
    std::vector<std::size_t> depths;
    std::size_t seeds = 1;
    std::vector<double> sigma_w2 = {2.0};
    std::vector<double> eta;
    bool normalize_variance = false;
    std::string input = "synthetic";
    std::size_t input_dim = 0;  // 0: same as n
    std::size_t output_dim = 0;
    std::size_t k = 1;
    std::vector<PruningEntry> pruning;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;
    std::string out_path;
    // ApproxVerify
    std::size_t layer = 10;
    std::size_t pairs = 200;
    // ConditionCheck
    std::size_t samples = 200;

    std::size_t effective_input_dim() const { return input_dim == 0 ? n : input_dim; }
};

namespace detail {

inline const std::set<std::string, std::less<>>& known_keys() {
    static const std::set<std::string, std::less<>> keys = {
        "experiment_id", "kind", "n", "depths", "seeds", "sigma_w2", "eta", "normalize_variance",
        "input", "input_dim", "output_dim", "k", "pruning", "master_seed", "threads", "out",
        "layer", "pairs", "samples"};
    return keys;
}

inline std::string where(const toml::node& node) {
    const auto& src = node.source();
    return src.begin ? " (line " + std::to_string(src.begin.line) + ")" : std::string();
}

inline double as_real(const toml::node& node, std::string_view key) {
    if (auto v = node.value<double>()) return *v;
    throw ConfigError("'" + std::string(key) + "' must be a number" + where(node));
}

inline std::size_t as_count(const toml::node& node, std::string_view key) {
    const auto* i = node.as_integer();
    if (!i || i->get() < 0) {
        throw ConfigError("'" + std::string(key) + "' must be a non-negative integer" + where(node));
    }
    return static_cast<std::size_t>(i->get());
}

inline std::string as_text(const toml::node& node, std::string_view key) {
    if (auto v = node.value<std::string>()) return *v;
    throw ConfigError("'" + std::string(key) + "' must be a string" + where(node));
}

/// Scalar or array of reals.
inline std::vector<double> as_real_list(const toml::node& node, std::string_view key) {
    std::vector<double> out;
    if (const auto* arr = node.as_array()) {
        for (const auto& el : *arr) out.push_back(as_real(el, key));
    } else {
        out.push_back(as_real(node, key));
    }
    return out;
}

inline std::vector<std::size_t> as_count_list(const toml::node& node, std::string_view key) {
    std::vector<std::size_t> out;
    if (const auto* arr = node.as_array()) {
        for (const auto& el : *arr) out.push_back(as_count(el, key));
    } else {
        out.push_back(as_count(node, key));
    }
    return out;
}

inline std::vector<std::string> as_text_list(const toml::node& node, std::string_view key) {
    std::vector<std::string> out;
    if (const auto* arr = node.as_array()) {
        for (const auto& el : *arr) out.push_back(as_text(el, key));
    } else {
        out.push_back(as_text(node, key));
    }
    return out;
}

inline std::vector<PruningEntry> expand_pruning(const toml::table& t, std::size_t n) {
    static const std::set<std::string, std::less<>> allowed = {"method", "s", "t", "r", "c", "scaling"};
    for (auto&& [key, value] : t) {
        if (!allowed.contains(key.str())) {
            throw ConfigError("unknown key 'pruning." + std::string(key.str()) + "'" + where(value));
        }
    }
    const auto* method_node = t.get("method");
    if (!method_node) throw ConfigError("[[pruning]] entry without 'method'" + where(t));
    const std::string method = as_text(*method_node, "method");

    std::vector<ScalingMode> modes = {ScalingMode::None};
    if (const auto* sc = t.get("scaling")) {
        modes.clear();
        for (const auto& m : as_text_list(*sc, "scaling")) modes.push_back(parse_scaling_mode(m));
    }
    const auto count_params = [&] {
        int c = 0;
        for (const char* k : {"s", "t", "r", "c"}) c += t.contains(k) ? 1 : 0;
        return c;
    }();
    if (count_params != 1) {
        throw ConfigError("[[pruning]] '" + method + "' needs exactly one of s, t, r, c" + where(t));
    }
    const double nn = static_cast<double>(n);
    std::vector<PruningEntry> out;
    if (method == "random") {
        if (!t.contains("s")) throw ConfigError("random pruning takes 's'" + where(t));
        for (double s : as_real_list(*t.get("s"), "s")) {
            if (!(s >= 0.0 && s < 1.0)) throw ConfigError("random pruning: s must lie in [0, 1)" + where(t));
            for (auto m : modes) out.push_back({PruningSpec{RandomPruning{s}, m}, s});
        }
    } else if (method == "magnitude_threshold") {
        if (!t.contains("t")) throw ConfigError("magnitude_threshold takes 't'" + where(t));
        for (double th : as_real_list(*t.get("t"), "t")) {
            if (!(th > 0.0)) throw ConfigError("magnitude_threshold: t must be positive" + where(t));
            const double nominal = std::erf(th * std::sqrt(nn) / 2.0);
            for (auto m : modes) out.push_back({PruningSpec{MagnitudeThreshold{th}, m}, nominal});
        }
    } else if (method == "magnitude_top_r") {
        std::vector<std::size_t> rs;
        if (t.contains("r")) {
            rs = as_count_list(*t.get("r"), "r");
        } else if (t.contains("s")) {
            for (double s : as_real_list(*t.get("s"), "s")) {
                if (!(s >= 0.0 && s < 1.0)) throw ConfigError("magnitude_top_r: s must lie in [0, 1)" + where(t));
                rs.push_back(top_r_from_sparsity(n, s));
            }
        } else if (t.contains("c")) {
            for (double c : as_real_list(*t.get("c"), "c")) rs.push_back(top_r_from_exponent(n, c));
        } else {
            throw ConfigError("magnitude_top_r takes r, s or c" + where(t));
        }
        for (auto r : rs) {
            if (r == 0 || r > n * n) throw ConfigError("magnitude_top_r: r must lie in [1, n^2]" + where(t));
            const double nominal = 1.0 - static_cast<double>(r) / (nn * nn);
            for (auto m : modes) out.push_back({PruningSpec{MagnitudeTopR{r}, m}, nominal});
        }
    } else {
        throw ConfigError("unknown pruning method '" + method +
                          "' (expected random|magnitude_threshold|magnitude_top_r)" + where(t));
    }
    return out;
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    if (c.n == 0) throw ConfigError("'n' must be >= 1");
    if (c.seeds == 0) throw ConfigError("'seeds' must be >= 1");
    const bool needs_depths = c.kind != ExperimentKind::ConditionCheck;
    if (needs_depths && c.depths.empty()) throw ConfigError("'depths' must be non-empty");
    for (std::size_t i = 0; i < c.depths.size(); ++i) {
        if (c.depths[i] == 0) throw ConfigError("'depths' entries must be >= 1");
        if (i > 0 && c.depths[i] <= c.depths[i - 1]) throw ConfigError("'depths' must be strictly ascending");
    }
    if (c.sigma_w2.empty()) throw ConfigError("'sigma_w2' must be non-empty");
    for (double s : c.sigma_w2)
        if (!(s > 0.0)) throw ConfigError("'sigma_w2' values must be > 0");
    for (double e : c.eta)
        if (!(e >= 0.0)) throw ConfigError("'eta' values must be >= 0");
    if (needs_depths && (c.k == 0 || c.k > c.depths.front())) {
        throw ConfigError("'k' must lie in [1, min(depths)]");
    }
    if (c.threads == 0) throw ConfigError("'threads' must be >= 1");
    switch (c.kind) {
        case ExperimentKind::PruneSweep:
            if (c.pruning.empty()) throw ConfigError("PruneSweep needs at least one [[pruning]] entry");
            break;
        case ExperimentKind::CorrSweep:
            if (c.eta.empty()) throw ConfigError("CorrSweep needs a non-empty 'eta' array");
            break;
        case ExperimentKind::ApproxVerify:
            if (c.layer == 0 || c.layer > c.depths.front()) {
                throw ConfigError("'layer' must lie in [1, depths[0]]");
            }
            if (c.seeds < 2) throw ConfigError("ApproxVerify needs seeds >= 2");
            if (c.n < 2 || c.pairs > c.n * (c.n - 1) / 2) {
                throw ConfigError("'pairs' exceeds the number of distinct entry pairs");
            }
            break;
        case ExperimentKind::ConditionCheck:
            if (c.samples < 100) throw ConfigError("'samples' must be >= 100");
            break;
        case ExperimentKind::DepthSweep: break;
    }
}

/// Parses TOML text. `expected` is the kind implied by the subcommand; a
/// `kind` key that disagrees with it is an error.
inline ExperimentConfig parse_config(std::string_view text, ExperimentKind expected,
                                     std::string_view source = "config") {
    toml::table tbl;
    try {
        tbl = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(msg.str());
    }
    for (auto&& [key, value] : tbl) {
        if (!detail::known_keys().contains(key.str())) {
            throw ConfigError("unknown config key '" + std::string(key.str()) + "'" + detail::where(value));
        }
    }
    ExperimentConfig c;
    c.kind = expected;
    if (const auto* v = tbl.get("kind")) {
        const auto k = parse_kind(detail::as_text(*v, "kind"));
        if (k != expected) {
            throw ConfigError("config kind " + to_string(k) + " does not match subcommand (" +
                              to_string(expected) + ")");
        }
    }
    if (const auto* v = tbl.get("experiment_id")) c.experiment_id = detail::as_text(*v, "experiment_id");
    if (const auto* v = tbl.get("n")) c.n = detail::as_count(*v, "n");
    if (const auto* v = tbl.get("depths")) c.depths = detail::as_count_list(*v, "depths");
    if (const auto* v = tbl.get("seeds")) c.seeds = detail::as_count(*v, "seeds");
    if (const auto* v = tbl.get("sigma_w2")) c.sigma_w2 = detail::as_real_list(*v, "sigma_w2");
    if (const auto* v = tbl.get("eta")) c.eta = detail::as_real_list(*v, "eta");
    if (const auto* v = tbl.get("normalize_variance")) {
        const auto b = v->value<bool>();
        if (!b) throw ConfigError("'normalize_variance' must be a boolean" + detail::where(*v));
        c.normalize_variance = *b;
    }
    if (const auto* v = tbl.get("input")) c.input = detail::as_text(*v, "input");
    if (const auto* v = tbl.get("input_dim")) c.input_dim = detail::as_count(*v, "input_dim");
    if (const auto* v = tbl.get("output_dim")) c.output_dim = detail::as_count(*v, "output_dim");
    if (const auto* v = tbl.get("k")) c.k = detail::as_count(*v, "k");
    if (const auto* v = tbl.get("master_seed")) c.master_seed = detail::as_count(*v, "master_seed");
    if (const auto* v = tbl.get("threads")) c.threads = detail::as_count(*v, "threads");
    if (const auto* v = tbl.get("out")) c.out_path = detail::as_text(*v, "out");
    if (const auto* v = tbl.get("layer")) c.layer = detail::as_count(*v, "layer");
    if (const auto* v = tbl.get("pairs")) c.pairs = detail::as_count(*v, "pairs");
    if (const auto* v = tbl.get("samples")) c.samples = detail::as_count(*v, "samples");
    if (const auto* v = tbl.get("pruning")) {
        if (c.n == 0) throw ConfigError("'n' must be set before [[pruning]] can be expanded");
        const auto* arr = v->as_array();
        if (!arr) throw ConfigError("'pruning' must be an array of tables ([[pruning]])" + detail::where(*v));
        for (const auto& el : *arr) {
            const auto* t = el.as_table();
            if (!t) throw ConfigError("'pruning' entries must be tables" + detail::where(el));
            auto entries = detail::expand_pruning(*t, c.n);
            c.pruning.insert(c.pruning.end(), entries.begin(), entries.end());
        }
    }
    validate(c);
    return c;
}

/// Reads a TOML config, or the config echoed inside a `.manifest.json`.
inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentKind expected) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (path.extension() == ".json") {
        try {
            text = nlohmann::json::parse(text).at("config_toml").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path.string() + ": not a manifest with a config echo (" + e.what() + ")");
        }
    }
    return parse_config(text, expected, path.string());
}

namespace detail {

inline std::string toml_string(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

/// TOML float literal that parses back to exactly v.
inline std::string toml_real(double v) {
    std::string s = format_double(v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

template <class T, class F>
std::string toml_list(const std::vector<T>& xs, F fmt) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
    return out + "]";
}

}  // namespace detail

/// Effective configuration as TOML. Parsing it back gives an equal config,
/// so it is what the manifest echoes for byte-identical reruns. `threads`
/// and `out` are left out: they do not affect the rows.
inline std::string to_toml(const ExperimentConfig& c) {
    using detail::toml_list;
    using detail::toml_real;
    const auto count = [](std::size_t v) { return std::to_string(v); };
    std::ostringstream o;
    o << "experiment_id = " << detail::toml_string(c.experiment_id) << '\n';
    o << "kind = " << detail::toml_string(to_string(c.kind)) << '\n';
    o << "master_seed = " << c.master_seed << '\n';
    o << "n = " << c.n << '\n';
    o << "depths = " << toml_list(c.depths, count) << '\n';
    o << "seeds = " << c.seeds << '\n';
    o << "sigma_w2 = " << toml_list(c.sigma_w2, toml_real) << '\n';
    if (!c.eta.empty()) o << "eta = " << toml_list(c.eta, toml_real) << '\n';
    o << "normalize_variance = " << (c.normalize_variance ? "true" : "false") << '\n';
    o << "input = " << detail::toml_string(c.input) << '\n';
    o << "input_dim = " << c.input_dim << '\n';
    o << "output_dim = " << c.output_dim << '\n';
    o << "k = " << c.k << '\n';
    o << "layer = " << c.layer << '\n';
    o << "pairs = " << c.pairs << '\n';
    o << "samples = " << c.samples << '\n';
    for (const auto& p : c.pruning) {
        o << "\n[[pruning]]\n";
        o << "method = " << detail::toml_string(p.spec.method_name()) << '\n';
        if (const auto* rp = std::get_if<RandomPruning>(&p.spec.method)) {
            o << "s = " << toml_real(rp->sparsity) << '\n';
        } else if (const auto* th = std::get_if<MagnitudeThreshold>(&p.spec.method)) {
            o << "t = " << toml_real(th->threshold) << '\n';
        } else {
            o << "r = " << std::get<MagnitudeTopR>(p.spec.method).keep << '\n';
        }
        o << "scaling = " << detail::toml_string(to_string(p.spec.scaling)) << '\n';
    }
    return o.str();
}

/// Method parameter as written to the manifest (s, t or r).
inline std::string pruning_parameter(const PruningEntry& p) {
    if (const auto* rp = std::get_if<RandomPruning>(&p.spec.method)) return "s=" + format_double(rp->sparsity);
    if (const auto* th = std::get_if<MagnitudeThreshold>(&p.spec.method)) return "t=" + format_double(th->threshold);
    return "r=" + std::to_string(std::get<MagnitudeTopR>(p.spec.method).keep);
}

}  // namespace jacspec::harness
