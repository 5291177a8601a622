#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "jacspec/error.hpp"
#include "jacspec/harness/config.hpp"
#include "jacspec/rng.hpp"

#ifndef JACSPEC_VERSION
#define JACSPEC_VERSION "0.0.0"
#endif

namespace jacspec::harness {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes `text` to a sibling temp file and renames it over `path`, so
/// readers never see a half-written file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::filesystem::path manifest_path(const std::filesystem::path& out) {
    auto p = out;
    p += ".manifest.json";
    return p;
}

/// Skeleton shared by every manifest; callers add kind-specific fields.
inline nlohmann::json make_manifest(const ExperimentConfig& config, const std::filesystem::path& out,
                                    std::size_t rows, const std::string& started_at) {
    nlohmann::json m;
    m["experiment_id"] = config.experiment_id;
    m["kind"] = to_string(config.kind);
    m["output"] = out.filename().string();
    m["config_toml"] = to_toml(config);
    m["master_seed"] = config.master_seed;
    m["version"] = JACSPEC_VERSION;
    m["generator"] = kGeneratorName;
    m["rows"] = rows;
    m["started_at"] = started_at;
    m["finished_at"] = utc_timestamp();
    return m;
}

inline void write_manifest(const std::filesystem::path& out, const nlohmann::json& manifest) {
    write_atomically(manifest_path(out), manifest.dump(2) + "\n");
}

}  // namespace jacspec::harness
