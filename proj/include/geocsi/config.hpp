#pragma once

// Run configuration: a flat `key = value` text file. Keys are dotted
// (`radio.frequency_hz`), lists are comma separated, `#` starts a comment.
// Relative paths are resolved against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geocsi/error.hpp"
#include "geocsi/geometry.hpp"
#include "geocsi/path_io.hpp"

namespace geocsi {

class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig c;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ParseError("config: expected key = value", line_no);
            const std::string key = trim(t.substr(0, eq));
            if (key.empty()) throw ParseError("config: empty key", line_no);
            if (c.values_.contains(key)) throw ParseError("config: duplicate key '" + key + "'", line_no);
            c.values_[key] = trim(t.substr(eq + 1));
        }
        return c;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file " + path.string());
        KeyValueConfig c = parse(in);
        c.base_dir_ = path.parent_path();
        return c;
    }

    bool has(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }
    const std::filesystem::path& base_dir() const { return base_dir_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return parse_number(it->second);
        } catch (const ParseError&) {
            throw ParseError("config: '" + key + "' is not a number");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != it->second.size()) throw ParseError("config: '" + key + "' is not an integer");
        return v;
    }

    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(it->second, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != it->second.size()) throw ParseError("config: '" + key + "' is not a seed");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw ParseError("config: '" + key + "' is not a boolean");
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        for (const auto& f : split_csv_line(it->second)) out.push_back(parse_number(trim(f)));
        return out;
    }

    std::vector<int> get_ints(const std::string& key, std::vector<int> fallback) const {
        std::vector<int> out;
        for (double v : get_doubles(key, {fallback.begin(), fallback.end()})) {
            if (v != static_cast<int>(v)) throw ParseError("config: '" + key + "' must list integers");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

    std::filesystem::path get_path(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw Error("config: missing required key '" + key + "'");
        std::filesystem::path p(it->second);
        return p.is_absolute() ? p : base_dir_ / p;
    }

    /// Canonical `key=value` lines of every key starting with one of `prefixes`.
    std::string canonical(const std::vector<std::string>& prefixes) const {
        std::ostringstream out;
        for (const auto& [k, v] : values_)
            for (const auto& p : prefixes)
                if (k == p || k.starts_with(p + ".")) {
                    out << k << '=' << v << '\n';
                    break;
                }
        return out.str();
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

private:
    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_;
};

inline Point3 parse_point(const std::string& text) {
    const auto f = split_csv_line(text);
    if (f.size() != 3) throw ParseError("expected x,y,z but got '" + text + "'");
    return {parse_number(KeyValueConfig::trim(f[0])), parse_number(KeyValueConfig::trim(f[1])),
            parse_number(KeyValueConfig::trim(f[2]))};
}

}  // namespace geocsi
