// io.hpp - CSV and manifest plumbing. Numbers go through to_chars/from_chars
// so output never depends on the process locale.
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "vacscan/config.hpp"
#include "vacscan/error.hpp"

namespace vacscan {

inline constexpr const char* tool_version = "1.0.0";
inline constexpr const char* output_dir_env = "VACSCAN_OUT_DIR";

/// Shortest-safe decimal: 17 significant digits, '.' separator.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    if (first < last && *first == '+') ++first;
    const auto r = std::from_chars(first, last, v);
    if (r.ec != std::errc() || r.ptr != last) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Provenance of one CLI invocation. The hash covers everything that
/// determines the data payload (not output paths, not the timestamp).
struct RunManifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> flags;    // name, value
    std::vector<std::pair<std::string, std::uint64_t>> inputs;  // path, content hash
    std::vector<std::string> outputs;
    std::string timestamp;

    std::uint64_t hash() const {
        std::ostringstream s;
        s << tool_version << '\n' << command << '\n' << hex64(config_hash) << '\n' << seed << '\n';
        for (const auto& [k, v] : flags) s << k << '=' << v << '\n';
        for (const auto& in : inputs) s << "input " << hex64(in.second) << '\n';
        return fnv1a64(s.str());
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["tool"] = "vacscan";
        j["version"] = tool_version;
        j["command"] = command;
        j["manifest_hash"] = hex64(hash());
        j["config_hash"] = hex64(config_hash);
        j["seed"] = seed;
        auto& f = j["flags"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : flags) f[k] = v;
        auto& in = j["inputs"] = nlohmann::ordered_json::array();
        for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"content_hash", hex64(h)}});
        j["outputs"] = outputs;
        j["timestamp"] = timestamp;
        return j;
    }
};

inline std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

/// Column-oriented table with "# key: value" metadata lines above the header row.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string meta_value(const std::string& key) const {
        for (const auto& [k, v] : meta)
            if (k == key) return v;
        return {};
    }

    bool has_meta(const std::string& key) const {
        for (const auto& kv : meta)
            if (kv.first == key) return true;
        return false;
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw InvalidArgument("missing column '" + name + "'");
    }

    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

/// Header block: tool line, manifest and config hashes, seed, caller metadata,
/// and the timestamp last so byte comparisons can drop a single line.
inline void write_csv(std::ostream& out, const CsvTable& t, const RunManifest& m) {
    out << "# vacscan " << m.command << '\n';
    out << "# manifest_hash: " << hex64(m.hash()) << '\n';
    out << "# config_hash: " << hex64(m.config_hash) << '\n';
    out << "# seed: " << m.seed << '\n';
    for (const auto& [k, v] : t.meta) out << "# " << k << ": " << v << '\n';
    out << "# timestamp: " << m.timestamp << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const CsvTable& t, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    write_csv(out, t, m);
    if (!out) throw Error("write failed for '" + path + "'");
}

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(": ");
            if (colon != std::string::npos && colon > 2) t.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size()) throw InvalidArgument("ragged CSV row: '" + line + "'");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    if (!header) throw InvalidArgument("CSV has no header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return read_csv(in);
    } catch (const InvalidArgument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

/// Output directory: explicit flag, else the environment override, else ".".
inline std::filesystem::path output_directory(const std::string& flag) {
    std::filesystem::path dir = ".";
    if (!flag.empty()) dir = flag;
    else if (const char* env = std::getenv(output_dir_env); env && *env) dir = env;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

// Kernels travel as two-column CSV (offset_m, weight).
inline CsvTable kernel_table(const PositionSpreadKernel& k) {
    CsvTable t;
    t.meta.emplace_back("axis", k.axis == SpreadAxis::z ? "z" : "xz");
    t.meta.emplace_back("pitch_m", format_double(k.pitch));
    t.columns = {"offset_m", "weight"};
    for (std::size_t i = 0; i < k.weights.size(); ++i) t.rows.push_back({k.offset(i), k.weights[i]});
    return t;
}

inline PositionSpreadKernel kernel_from_table(const CsvTable& t) {
    const auto off = t.values("offset_m");
    PositionSpreadKernel k;
    k.weights = t.values("weight");
    k.axis = t.meta_value("axis") == "xz" ? SpreadAxis::xz : SpreadAxis::z;
    if (off.size() > 1) k.pitch = (off.back() - off.front()) / static_cast<double>(off.size() - 1);
    else k.pitch = t.has_meta("pitch_m") ? parse_double(t.meta_value("pitch_m")) : 1e-9;
    try {
        k.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("kernel file: ") + e.what());
    }
    return k;
}

}  // namespace vacscan
