#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "nlarch/errors.hpp"

namespace nlarch::io {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

/// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

// ---- CSV ingestion ---------------------------------------------------------------

struct Series {
    std::vector<double> values;
    std::vector<std::string> keys;  // first-column entries, in output order
    std::string column;
    std::size_t dropped = 0;        // "." or empty values
};

/// Reads a headed CSV. The value column is the one named "y" if present, else
/// the second column (or the only one). Rows are returned ordered by the first
/// column: numerically when every key is numeric, else as text (ISO dates).
inline Series ingest_csv(const std::filesystem::path& path, std::size_t min_rows = 2) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        header = split(line, ',');
        break;
    }
    if (header.empty()) throw InsufficientData("input file " + path.string() + " has no header row");
    std::size_t col = header.size() >= 2 ? 1 : 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string h = header[i];
        std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (h == "y") col = i;
    }

    struct Row {
        std::string key;
        double value;
        std::size_t order;
    };
    std::vector<Row> rows;
    Series s;
    s.column = header[col];
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size()) {
            throw ParseError(lineno, "expected " + std::to_string(header.size()) + " fields, found " +
                                         std::to_string(f.size()));
        }
        const std::string& raw = f[col];
        if (raw.empty() || raw == ".") {
            ++s.dropped;
            continue;
        }
        double v = 0.0;
        if (!parse_double(raw, v) || !std::isfinite(v)) throw ParseError(lineno, "cannot parse value '" + raw + "'");
        rows.push_back({f[0], v, rows.size()});
    }
    if (header.size() >= 2 && col != 0) {
        bool numeric = true;
        std::vector<double> nk(rows.size());
        for (std::size_t i = 0; i < rows.size() && numeric; ++i) numeric = parse_double(rows[i].key, nk[i]);
        if (numeric) {
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i].order = i;
            std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) { return nk[a.order] < nk[b.order]; });
        } else {
            std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
        }
    }
    for (const auto& r : rows) {
        s.values.push_back(r.value);
        s.keys.push_back(r.key);
    }
    if (s.values.size() < min_rows) {
        throw InsufficientData("input has " + std::to_string(s.values.size()) + " usable rows, at least " +
                               std::to_string(min_rows) + " are required");
    }
    return s;
}

// ---- CSV writing -----------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw DataError("cannot write " + path.string());
        row_strings(header);
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << fmt(values[i]);
        }
        out_ << '\n';
    }

    void row_strings(const std::vector<std::string>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << values[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

// ---- config files ------------------------------------------------------------------

/// Flat `key = value` file. `[section]` lines prefix the following keys with
/// "section."; '#' and ';' start comments.
class Config {
public:
    Config() = default;

    static Config parse(std::istream& in) {
        Config c;
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
                section = trim(std::string_view(t).substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(std::string_view(t).substr(0, eq));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            if (!section.empty()) key = section + "." + key;
            c.set(key, trim(std::string_view(t).substr(eq + 1)));
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    [[nodiscard]] bool has(const std::string& key) const { return kv_.count(key) != 0; }
    [[nodiscard]] const std::map<std::string, std::string>& entries() const noexcept { return kv_; }

    [[nodiscard]] std::string str(const std::string& key, const std::string& def = "") const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    [[nodiscard]] double num(const std::string& key, double def) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        double v = 0.0;
        if (!parse_double(it->second, v)) throw ConfigError("config key " + key + ": '" + it->second + "' is not a number");
        return v;
    }

    [[nodiscard]] std::size_t count(const std::string& key, std::size_t def) const {
        const double v = num(key, static_cast<double>(def));
        if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("config key " + key + " must be a non-negative integer");
        return static_cast<std::size_t>(v);
    }

    [[nodiscard]] bool flag(const std::string& key, bool def) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        const auto& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key " + key + ": '" + v + "' is not a boolean");
    }

    [[nodiscard]] std::vector<double> list(const std::string& key, const std::vector<double>& def = {}) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        std::vector<double> out;
        if (trim(it->second).empty()) return out;
        for (const auto& part : split(it->second, ',')) {
            double v = 0.0;
            if (!parse_double(part, v)) throw ConfigError("config key " + key + ": '" + part + "' is not a number");
            out.push_back(v);
        }
        return out;
    }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace nlarch::io
