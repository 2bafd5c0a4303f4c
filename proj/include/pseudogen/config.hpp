#pragma once

#include "core.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pseudogen {

/// A configuration error; the message carries `source:line:` when the
/// problem can be pinned to a line.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Plain-text configuration:
///
///     # comment
///     [dynamics]
///     friction = 5
///     [experiment]
///     lags = [0.1, 0.2, 0.4]
///     [potential]
///     name = "double_well_1d"
///
/// Values are numbers, quoted or bare strings, booleans, or bracketed
/// comma-separated lists. Every key must be read by the command; leftovers
/// are reported by `reject_unused`.
class Config {
public:
    static inline const std::set<std::string> kSections{"potential", "dynamics", "grid", "experiment"};

    static Config parse(std::istream& in, const std::string& source = "<config>") {
        Config cfg;
        cfg.source_ = source;
        std::string raw;
        std::string section;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = strip(strip_comment(raw));
            if (line.empty()) {
                continue;
            }
            if (line.front() == '[') {
                if (line.back() != ']') {
                    throw ConfigError(cfg.where(line_no) + "unterminated section header");
                }
                section = strip(line.substr(1, line.size() - 2));
                if (!kSections.contains(section)) {
                    throw ConfigError(cfg.where(line_no) + "unknown section [" + section + "]");
                }
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(cfg.where(line_no) + "expected `key = value`");
            }
            if (section.empty()) {
                throw ConfigError(cfg.where(line_no) + "key outside of any section");
            }
            const std::string key = strip(line.substr(0, eq));
            const std::string value = strip(line.substr(eq + 1));
            if (key.empty() || value.empty()) {
                throw ConfigError(cfg.where(line_no) + "empty key or value");
            }
            auto& sec = cfg.entries_[section];
            if (sec.contains(key)) {
                throw ConfigError(cfg.where(line_no) + "duplicate key " + section + "." + key + " (first set on line " +
                                  std::to_string(sec.at(key).line) + ")");
            }
            sec.emplace(key, Entry{value, line_no});
        }
        return cfg;
    }

    static Config parse_string(const std::string& text, const std::string& source = "<config>") {
        std::istringstream in(text);
        return parse(in, source);
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file " + path.string());
        }
        return parse(in, path.string());
    }

    [[nodiscard]] bool has(const std::string& section, const std::string& key) const {
        const auto it = entries_.find(section);
        return it != entries_.end() && it->second.contains(key);
    }

    /// Sets or replaces a value (used by the CLI and tests to override keys).
    void set(const std::string& section, const std::string& key, const std::string& value) {
        require(kSections.contains(section), "config: unknown section " + section);
        entries_[section][key] = Entry{value, 0};
    }

    [[nodiscard]] std::string get_string(const std::string& section, const std::string& key) const {
        const Entry& e = entry(section, key);
        return unquote(e.value);
    }
    [[nodiscard]] std::string get_string(const std::string& section, const std::string& key,
                                         const std::string& fallback) const {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    [[nodiscard]] double get_double(const std::string& section, const std::string& key) const {
        const Entry& e = entry(section, key);
        return to_double(e.value, e.line, section + "." + key);
    }
    [[nodiscard]] double get_double(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    [[nodiscard]] std::int64_t get_int(const std::string& section, const std::string& key) const {
        const Entry& e = entry(section, key);
        const double x = to_double(e.value, e.line, section + "." + key);
        if (x != std::floor(x) || std::abs(x) > 9.0e15) {
            throw ConfigError(where(e.line) + section + "." + key + " must be an integer, got " + e.value);
        }
        return static_cast<std::int64_t>(x);
    }
    [[nodiscard]] std::int64_t get_int(const std::string& section, const std::string& key,
                                       std::int64_t fallback) const {
        return has(section, key) ? get_int(section, key) : fallback;
    }

    /// Non-negative integer with a lower bound.
    [[nodiscard]] std::size_t get_count(const std::string& section, const std::string& key, std::size_t fallback,
                                        std::size_t minimum = 1) const {
        if (!has(section, key)) {
            return fallback;
        }
        const std::int64_t v = get_int(section, key);
        if (v < static_cast<std::int64_t>(minimum)) {
            throw ConfigError(where(entry(section, key).line) + section + "." + key + " must be at least " +
                              std::to_string(minimum));
        }
        return static_cast<std::size_t>(v);
    }

    [[nodiscard]] bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) {
            return fallback;
        }
        const Entry& e = entry(section, key);
        const std::string v = unquote(e.value);
        if (v == "true" || v == "yes" || v == "1") {
            return true;
        }
        if (v == "false" || v == "no" || v == "0") {
            return false;
        }
        throw ConfigError(where(e.line) + section + "." + key + " must be true or false, got " + e.value);
    }

    [[nodiscard]] std::vector<double> get_list(const std::string& section, const std::string& key) const {
        const Entry& e = entry(section, key);
        std::string body = e.value;
        if (body.front() == '[') {
            if (body.back() != ']') {
                throw ConfigError(where(e.line) + "unterminated list for " + section + "." + key);
            }
            body = body.substr(1, body.size() - 2);
        }
        std::vector<double> out;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = strip(item);
            if (item.empty()) {
                throw ConfigError(where(e.line) + "empty list element in " + section + "." + key);
            }
            out.push_back(to_double(item, e.line, section + "." + key));
        }
        if (out.empty()) {
            throw ConfigError(where(e.line) + section + "." + key + " is an empty list");
        }
        return out;
    }
    [[nodiscard]] std::vector<double> get_list(const std::string& section, const std::string& key,
                                               std::vector<double> fallback) const {
        return has(section, key) ? get_list(section, key) : fallback;
    }

    /// Throws a line-precise error if a value fails a check.
    void check(bool ok, const std::string& section, const std::string& key, const std::string& message) const {
        if (!ok) {
            const int line = has(section, key) ? entry(section, key).line : 0;
            throw ConfigError(where(line) + section + "." + key + ": " + message);
        }
    }

    /// Rejects keys that no reader touched, which are almost always typos.
    void reject_unused() const {
        for (const auto& [section, keys] : entries_) {
            for (const auto& [key, e] : keys) {
                if (!e.used) {
                    throw ConfigError(where(e.line) + "unknown key " + section + "." + key);
                }
            }
        }
    }

    /// Canonical text form: sections and keys sorted, one `section.key = value` per line.
    [[nodiscard]] std::string snapshot() const {
        std::ostringstream os;
        for (const auto& [section, keys] : entries_) {
            for (const auto& [key, e] : keys) {
                os << section << '.' << key << " = " << e.value << '\n';
            }
        }
        return os.str();
    }

    [[nodiscard]] const std::string& source() const { return source_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };

    [[nodiscard]] const Entry& entry(const std::string& section, const std::string& key) const {
        const auto it = entries_.find(section);
        if (it == entries_.end() || !it->second.contains(key)) {
            throw ConfigError(source_ + ": missing required key " + section + "." + key);
        }
        const Entry& e = it->second.at(key);
        e.used = true;
        return e;
    }

    [[nodiscard]] std::string where(int line) const {
        return line > 0 ? source_ + ":" + std::to_string(line) + ": " : source_ + ": ";
    }

    [[nodiscard]] double to_double(const std::string& text, int line, const std::string& name) const {
        const std::string t = strip(text);
        double x = 0.0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
        if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(x)) {
            throw ConfigError(where(line) + name + " expects a number, got " + text);
        }
        return x;
    }

    static std::string strip(std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) {
            return {};
        }
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    }

    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') {
                quoted = !quoted;
            } else if (s[i] == '#' && !quoted) {
                return s.substr(0, i);
            }
        }
        return s;
    }

    static std::string unquote(const std::string& s) {
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
            return s.substr(1, s.size() - 2);
        }
        return s;
    }

    std::string source_;
    std::map<std::string, std::map<std::string, Entry>> entries_;
};

}  // namespace pseudogen
