#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spde {

class ConfigParseError : public std::runtime_error {
public:
    ConfigParseError(int line, int column, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + msg),
          line(line), column(column) {}
    int line;
    int column;
};

// Flat structured text: `key = value` lines grouped under `[section]`
// headers, full-line # comments, blank lines ignored. Values are kept as
// raw strings; typed access happens at read time.
class ConfigText {
public:
    static ConfigText parse(std::string_view text) {
        ConfigText out;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t eol = text.find('\n', pos);
            std::string_view line = text.substr(
                pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
            ++line_no;

            std::string_view trimmed = trim(line);
            if (!trimmed.empty() && trimmed[0] != '#') {
                if (trimmed.front() == '[') {
                    if (trimmed.back() != ']')
                        throw ConfigParseError(line_no, static_cast<int>(line.size()),
                                               "unterminated section header");
                    section = std::string(trim(trimmed.substr(1, trimmed.size() - 2)));
                    if (section.empty())
                        throw ConfigParseError(line_no, 2, "empty section name");
                } else {
                    std::size_t eq = trimmed.find('=');
                    if (eq == std::string_view::npos)
                        throw ConfigParseError(
                            line_no, static_cast<int>(line.find_first_not_of(" \t")) + 1,
                            "expected 'key = value'");
                    std::string key(trim(trimmed.substr(0, eq)));
                    std::string value(trim(trimmed.substr(eq + 1)));
                    if (key.empty())
                        throw ConfigParseError(line_no, 1, "empty key");
                    out.set(section, key, value);
                }
            }

            if (eol == std::string_view::npos) break;
            pos = eol + 1;
        }
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        std::string full = section.empty() ? key : section + "." + key;
        auto it = values_.find(full);
        if (it == values_.end()) {
            order_.push_back(full);
            values_.emplace(full, value);
        } else {
            it->second = value;
        }
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section.empty() ? key : section + "." + key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        auto it = values_.find(section.empty() ? key : section + "." + key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& section, const std::string& key,
                      double fallback) const {
        auto it = values_.find(section.empty() ? key : section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("config value '" + it->first + " = " + it->second +
                                     "' is not a number");
        }
    }

    long get_long(const std::string& section, const std::string& key, long fallback) const {
        auto it = values_.find(section.empty() ? key : section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (const std::exception&) {
            throw std::runtime_error("config value '" + it->first + " = " + it->second +
                                     "' is not an integer");
        }
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const {
        auto it = values_.find(section.empty() ? key : section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw std::runtime_error("config value '" + it->first + " = " + it->second +
                                     "' is not an unsigned integer");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        auto it = values_.find(section.empty() ? key : section + "." + key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::runtime_error("config value '" + it->first + "' is not a boolean");
    }

    // Canonical rendering: root keys first, then sections grouped in first-
    // appearance order.
    std::string serialize() const {
        std::string out;
        std::string current;
        bool first = true;
        for (const auto& full : order_) {
            std::size_t dot = full.rfind('.');
            std::string section = dot == std::string::npos ? "" : full.substr(0, dot);
            std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
            if (section != current) {
                if (!first) out += "\n";
                out += "[" + section + "]\n";
                current = section;
            }
            out += key + " = " + values_.at(full) + "\n";
            first = false;
        }
        return out;
    }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    }

    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

}  // namespace spde
