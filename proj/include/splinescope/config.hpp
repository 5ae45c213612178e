#ifndef SPLINESCOPE_CONFIG_HPP
#define SPLINESCOPE_CONFIG_HPP

#include "splinescope/common.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace splinescope {

// Experiment files are flat INI: [section] headers, key = value lines,
// comments with '#' or ';'. Lists are comma separated. One file is the
// canonical record of a run; its hash lands in every artifact.
class ConfigFile {
public:
    ConfigFile() = default;

    static ConfigFile parse(std::istream& is) {
        ConfigFile cfg;
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash_at = line.find_first_of("#;");
            if (hash_at != std::string::npos) line.erase(hash_at);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) +
                                      ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ConfigError("config line " + std::to_string(lineno) + ": empty section");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            cfg.values_[section][key] = value;
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file '" + path + "'");
        return parse(is);
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        values_[section][key] = value;
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto sec = values_.find(section);
        return sec != values_.end() && sec->second.count(key) > 0;
    }

    bool has_section(const std::string& section) const { return values_.count(section) > 0; }

    std::string get_string(const std::string& section, const std::string& key) const {
        const auto sec = values_.find(section);
        if (sec == values_.end() || !sec->second.count(key))
            throw ConfigError("missing config field [" + section + "] " + key);
        return sec->second.at(key);
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    long get_int(const std::string& section, const std::string& key, long fallback) const {
        if (!has(section, key)) return fallback;
        return parse_int(get_string(section, key), section, key);
    }

    long require_int(const std::string& section, const std::string& key) const {
        return parse_int(get_string(section, key), section, key);
    }

    double get_real(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) return fallback;
        return parse_real(get_string(section, key), section, key);
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = get_string(section, key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config field [" + section + "] " + key + ": expected a boolean, got '" +
                          v + "'");
    }

    std::vector<double> get_real_list(const std::string& section, const std::string& key,
                                      std::vector<double> fallback = {}) const {
        if (!has(section, key)) return fallback;
        std::vector<double> out;
        for (const std::string& item : split_list(get_string(section, key)))
            out.push_back(parse_real(item, section, key));
        return out;
    }

    std::vector<long> get_int_list(const std::string& section, const std::string& key,
                                   std::vector<long> fallback = {}) const {
        if (!has(section, key)) return fallback;
        std::vector<long> out;
        for (const std::string& item : split_list(get_string(section, key)))
            out.push_back(parse_int(item, section, key));
        return out;
    }

    // Canonical serialization: sections and keys sorted, one binding per
    // line. std::map keeps both orders for free.
    std::string canonical() const {
        std::ostringstream os;
        for (const auto& [section, entries] : values_)
            for (const auto& [key, value] : entries)
                os << section << '.' << key << '=' << value << '\n';
        return os.str();
    }

    // FNV-1a 64 over the canonical serialization.
    std::string hash() const {
        const std::string text = canonical();
        uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    static std::string trim(const std::string& s) {
        const auto begin = s.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return "";
        const auto end = s.find_last_not_of(" \t\r\n");
        return s.substr(begin, end - begin + 1);
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream is(s);
        while (std::getline(is, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static long parse_int(const std::string& v, const std::string& section,
                          const std::string& key) {
        try {
            size_t used = 0;
            const long out = std::stol(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config field [" + section + "] " + key +
                              ": expected an integer, got '" + v + "'");
        }
    }

    static double parse_real(const std::string& v, const std::string& section,
                             const std::string& key) {
        try {
            size_t used = 0;
            const double out = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config field [" + section + "] " + key +
                              ": expected a number, got '" + v + "'");
        }
    }

    std::map<std::string, std::map<std::string, std::string>> values_;
};

} // namespace splinescope

#endif
