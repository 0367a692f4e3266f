#pragma once

// Flat key/value configuration files: `key = value` lines, `#` comments.
// Values are ints, floats, strings, or lists of ints. The config hash is an
// FNV-1a digest over the sorted canonical key=value lines, so any field
// change shows up in the hash.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace igpg {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &what) : std::runtime_error(what) {}
};

class Config {
public:
    using Value = std::variant<int64_t, double, std::string, std::vector<int64_t>>;

    static Config parse(const std::string &text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const size_t eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string raw = trim(trimmed.substr(eq + 1));
            if (key.empty() || raw.empty()) {
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
            }
            cfg.values_[key] = parse_value(raw, lineno);
        }
        return cfg;
    }

    static Config load(const std::string &path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string &key) const { return values_.count(key) != 0; }

    int64_t get_int(const std::string &key) const {
        const Value &v = at(key);
        if (const auto *p = std::get_if<int64_t>(&v)) return *p;
        throw ConfigError("config field '" + key + "' is not an integer");
    }

    double get_double(const std::string &key) const {
        const Value &v = at(key);
        if (const auto *p = std::get_if<double>(&v)) return *p;
        if (const auto *p = std::get_if<int64_t>(&v)) return static_cast<double>(*p);
        throw ConfigError("config field '" + key + "' is not a number");
    }

    std::string get_string(const std::string &key) const {
        const Value &v = at(key);
        if (const auto *p = std::get_if<std::string>(&v)) return *p;
        throw ConfigError("config field '" + key + "' is not a string");
    }

    std::vector<int64_t> get_int_list(const std::string &key) const {
        const Value &v = at(key);
        if (const auto *p = std::get_if<std::vector<int64_t>>(&v)) return *p;
        throw ConfigError("config field '" + key + "' is not a list of ints");
    }

    int64_t get_int_or(const std::string &key, int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }
    double get_double_or(const std::string &key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }
    std::string get_string_or(const std::string &key, const std::string &fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    void set(const std::string &key, Value v) { values_[key] = std::move(v); }

    // canonical rendering, sorted by key
    std::string canonical() const {
        std::string out;
        for (const auto &[k, v] : values_) {
            out += k;
            out += "=";
            out += render(v);
            out += "\n";
        }
        return out;
    }

    uint64_t hash() const {
        uint64_t h = 1469598103934665603ULL;
        for (char c : canonical()) h = (h ^ static_cast<uint8_t>(c)) * 1099511628211ULL;
        return h;
    }

    std::string hash_hex() const {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

    const std::map<std::string, Value> &values() const { return values_; }

private:
    static std::string trim(const std::string &s) {
        const size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static Value parse_value(const std::string &raw, int lineno) {
        if (raw.front() == '[') {
            if (raw.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unclosed list");
            std::vector<int64_t> list;
            std::istringstream is(raw.substr(1, raw.size() - 2));
            std::string item;
            while (std::getline(is, item, ',')) {
                const std::string t = trim(item);
                if (t.empty()) continue;
                try {
                    size_t used = 0;
                    const int64_t v = std::stoll(t, &used);
                    if (used != t.size()) throw std::invalid_argument(t);
                    list.push_back(v);
                } catch (...) {
                    throw ConfigError("config line " + std::to_string(lineno) + ": bad list element '" + t + "'");
                }
            }
            return list;
        }
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
            return raw.substr(1, raw.size() - 2);
        }
        try {
            size_t used = 0;
            const int64_t v = std::stoll(raw, &used);
            if (used == raw.size()) return v;
        } catch (...) {
        }
        try {
            size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used == raw.size()) return v;
        } catch (...) {
        }
        return raw;  // bare string
    }

    static std::string render(const Value &v) {
        if (const auto *p = std::get_if<int64_t>(&v)) return std::to_string(*p);
        if (const auto *p = std::get_if<double>(&v)) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", *p);
            return buf;
        }
        if (const auto *p = std::get_if<std::string>(&v)) return *p;
        const auto &list = std::get<std::vector<int64_t>>(v);
        std::string out = "[";
        for (size_t i = 0; i < list.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(list[i]);
        }
        return out + "]";
    }

    const Value &at(const std::string &key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config field '" + key + "'");
        return it->second;
    }

    std::map<std::string, Value> values_;
};

}  // namespace igpg
