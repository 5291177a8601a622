#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "jacspec/diagnostics.hpp"
#include "jacspec/error.hpp"
#include "jacspec/matrix_io.hpp"

namespace jacspec::harness {

inline constexpr std::string_view kCsvHeader =
    "experiment_id,kind,seed,n,L,sigma_w2,method,sparsity,scaling_mode,scale_value,eta,k,"
    "log_jac_norm,converged,wall_time_ms";

inline constexpr std::string_view kNegInfSentinel = "neg_inf";

/// One (grid point, seed) observation.
struct SweepRow {
    std::string experiment_id;
    std::string kind;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t depth = 0;
    double sigma_w2 = 2.0;
    std::string method = "none";
    double sparsity = 0.0;
    std::string scaling_mode = "none";
    double scale_value = 1.0;
    double eta = 0.0;
    std::size_t k = 1;
    /// -inf for a dead network, NaN when the forward pass overflowed.
    double log_jac_norm = 0.0;
    bool converged = true;
    std::uint64_t wall_time_ms = 0;
};

inline std::string format_log_norm(double v) {
    if (v == -std::numeric_limits<double>::infinity()) return std::string(kNegInfSentinel);
    if (std::isnan(v)) return "nan";
    return format_double(v);
}

inline double parse_log_norm(std::string_view s) {
    if (s == kNegInfSentinel) return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return parse_double(s);
}

inline std::string format_row(const SweepRow& r) {
    std::string out;
    out.reserve(160);
    out += r.experiment_id;
    out += ',' + r.kind;
    out += ',' + std::to_string(r.seed);
    out += ',' + std::to_string(r.n);
    out += ',' + std::to_string(r.depth);
    out += ',' + format_double(r.sigma_w2);
    out += ',' + r.method;
    out += ',' + format_double(r.sparsity);
    out += ',' + r.scaling_mode;
    out += ',' + format_double(r.scale_value);
    out += ',' + format_double(r.eta);
    out += ',' + std::to_string(r.k);
    out += ',' + format_log_norm(r.log_jac_norm);
    out += r.converged ? ",1" : ",0";
    out += ',' + std::to_string(r.wall_time_ms);
    return out;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::uint64_t parse_uint(std::string_view s, std::string_view what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError("bad " + std::string(what) + " field '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline SweepRow parse_row(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto f = detail::split_commas(line);
    if (f.size() != 15) {
        throw IoError("CSV row has " + std::to_string(f.size()) + " fields, expected 15: " + std::string(line));
    }
    SweepRow r;
    r.experiment_id = f[0];
    r.kind = f[1];
    r.seed = detail::parse_uint(f[2], "seed");
    r.n = detail::parse_uint(f[3], "n");
    r.depth = detail::parse_uint(f[4], "L");
    r.sigma_w2 = parse_double(f[5]);
    r.method = f[6];
    r.sparsity = parse_double(f[7]);
    r.scaling_mode = f[8];
    r.scale_value = parse_double(f[9]);
    r.eta = parse_double(f[10]);
    r.k = detail::parse_uint(f[11], "k");
    r.log_jac_norm = parse_log_norm(f[12]);
    r.converged = f[13] == "1";
    r.wall_time_ms = detail::parse_uint(f[14], "wall_time_ms");
    return r;
}

inline std::vector<SweepRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw IoError(path.string() + " does not carry the sweep CSV header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(parse_row(line));
    }
    return rows;
}

/// Rows that differ only in depth and seed.
struct GroupKey {
    std::string experiment_id, kind, method, scaling_mode;
    std::size_t n = 0, k = 1;
    double sigma_w2 = 0.0, sparsity = 0.0, eta = 0.0;

    auto tie() const { return std::tie(experiment_id, kind, n, sigma_w2, method, sparsity, scaling_mode, eta, k); }
    bool operator<(const GroupKey& o) const { return tie() < o.tie(); }

    std::string label() const {
        return experiment_id + " " + kind + " n=" + std::to_string(n) + " sigma_w2=" + format_double(sigma_w2) +
               " method=" + method + " sparsity=" + format_double(sparsity) + " scaling=" + scaling_mode +
               " eta=" + format_double(eta) + " k=" + std::to_string(k);
    }
};

inline GroupKey group_key(const SweepRow& r) {
    return {r.experiment_id, r.kind, r.method, r.scaling_mode, r.n, r.k, r.sigma_w2, r.sparsity, r.eta};
}

struct GroupFit {
    GroupKey key;
    std::vector<GrowthPoint> points;  // mean log-norm over seeds, per depth
    std::size_t non_finite_rows = 0;
};

/// Mean ln‖J‖ per (group, depth). Rows with a non-finite log-norm are counted
/// and left out of the mean.
inline std::vector<GroupFit> group_means(const std::vector<SweepRow>& rows) {
    std::map<GroupKey, std::map<std::size_t, std::pair<double, std::size_t>>> acc;
    std::map<GroupKey, std::size_t> bad;
    for (const auto& r : rows) {
        const auto key = group_key(r);
        auto& cell = acc[key][r.depth];
        if (std::isfinite(r.log_jac_norm)) {
            cell.first += r.log_jac_norm;
            ++cell.second;
        } else {
            ++bad[key];
        }
    }
    std::vector<GroupFit> out;
    for (const auto& [key, by_depth] : acc) {
        GroupFit g{key, {}, bad[key]};
        for (const auto& [depth, sum] : by_depth) {
            if (sum.second > 0) g.points.push_back({static_cast<double>(depth), sum.first / static_cast<double>(sum.second)});
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace jacspec::harness
