#ifndef QPLAB_CONFIG_HPP
#define QPLAB_CONFIG_HPP

// Sectioned key-value configuration with explicit types:
//
//   [model]
//   potential: str = amo
//   lambda: f64 = 0.5
//   T: f64[] = 25, 50, 100
//
// Doubles are written in shortest round-trip form, so parse(serialize(c)) == c.

#include "qplab/core.hpp"

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace qplab {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>, std::vector<std::int64_t>>;

namespace detail {

inline const char* type_name(const ConfigValue& v) {
    static const char* names[] = {"bool", "i64", "f64", "str", "f64[]", "i64[]"};
    return names[v.index()];
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
    T out{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ConfigError(where + ": cannot read '" + s + "' as a number");
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& where) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(trim(item), where));
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_same_v<T, double>)
            out += format_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

inline ConfigValue parse_value(const std::string& type, const std::string& text, const std::string& where) {
    if (type == "bool") {
        if (text == "true") return true;
        if (text == "false") return false;
        throw ConfigError(where + ": bool must be true or false");
    }
    if (type == "i64") return detail::parse_number<std::int64_t>(text, where);
    if (type == "f64") return detail::parse_number<double>(text, where);
    if (type == "str") return text;
    if (type == "f64[]") return detail::parse_list<double>(text, where);
    if (type == "i64[]") return detail::parse_list<std::int64_t>(text, where);
    throw ConfigError(where + ": unknown type '" + type + "'");
}

inline std::string format_value(const ConfigValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>)
                return x ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::int64_t>)
                return std::to_string(x);
            else if constexpr (std::is_same_v<T, double>)
                return detail::format_double(x);
            else if constexpr (std::is_same_v<T, std::string>)
                return x;
            else
                return detail::join(x);
        },
        v);
}

class Config {
public:
    using Section = std::map<std::string, ConfigValue>;

    static Config parse(const std::string& text, const std::string& origin = "config") {
        Config c;
        std::stringstream ss(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            std::string where = origin + ":" + std::to_string(lineno);
            std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t.front() == '[') {
                if (t.back() != ']') throw ConfigError(where + ": unterminated section header");
                section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
                if (section.empty()) throw ConfigError(where + ": empty section name");
                c.sections_[section];
                continue;
            }
            if (section.empty()) throw ConfigError(where + ": key outside of a section");
            auto colon = t.find(':'), eq = t.find('=');
            if (colon == std::string::npos || eq == std::string::npos || eq < colon)
                throw ConfigError(where + ": expected 'key: type = value'");
            std::string key = detail::trim(std::string_view(t).substr(0, colon));
            std::string type = detail::trim(std::string_view(t).substr(colon + 1, eq - colon - 1));
            std::string value = detail::trim(std::string_view(t).substr(eq + 1));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (c.sections_[section].count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
            c.sections_[section][key] = parse_value(type, value, where + " (" + section + "." + key + ")");
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    std::string serialize() const {
        std::string out;
        for (const auto& [name, sec] : sections_) {
            if (!out.empty()) out += "\n";
            out += "[" + name + "]\n";
            for (const auto& [key, v] : sec) out += key + ": " + detail::type_name(v) + " = " + format_value(v) + "\n";
        }
        return out;
    }

    /// FNV-1a 64 of the canonical serialization, as 16 hex digits.
    std::string digest() const {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : serialize()) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    bool has(const std::string& sec, const std::string& key) const {
        auto it = sections_.find(sec);
        return it != sections_.end() && it->second.count(key);
    }

    const ConfigValue& raw(const std::string& sec, const std::string& key) const {
        if (!has(sec, key)) throw ConfigError("missing key " + sec + "." + key);
        return sections_.at(sec).at(key);
    }

    template <class T>
    T get(const std::string& sec, const std::string& key) const {
        const auto& v = raw(sec, key);
        if constexpr (std::is_same_v<T, double>) {
            if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
        }
        if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (auto* d = std::get_if<double>(&v)) return {*d};
            if (auto* i = std::get_if<std::int64_t>(&v)) return {static_cast<double>(*i)};
        }
        if (auto* p = std::get_if<T>(&v)) return *p;
        throw ConfigError(sec + "." + key + " has type " + detail::type_name(v));
    }

    template <class T>
    T get_or(const std::string& sec, const std::string& key, T fallback) const {
        return has(sec, key) ? get<T>(sec, key) : fallback;
    }

    void set(const std::string& sec, const std::string& key, ConfigValue v) { sections_[sec][key] = std::move(v); }

    /// QPLAB_<SECTION>_<KEY> replaces an existing entry, parsed with the entry's type.
    template <class Getenv>
    void apply_env(Getenv getenv_fn) {
        for (auto& [name, sec] : sections_)
            for (auto& [key, v] : sec) {
                std::string var = "QPLAB_" + name + "_" + key;
                for (auto& ch : var) ch = ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
                if (const char* val = getenv_fn(var.c_str()))
                    v = parse_value(detail::type_name(v), detail::trim(val), "environment " + var);
            }
    }
    void apply_env() {
        apply_env([](const char* n) { return std::getenv(n); });
    }

    const std::map<std::string, Section>& sections() const { return sections_; }
    bool operator==(const Config& o) const { return sections_ == o.sections_; }

private:
    std::map<std::string, Section> sections_;
};

}  // namespace qplab

#endif
