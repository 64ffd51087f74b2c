#include "drcorl/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace drcorl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::pair<std::string, std::string> split_key(const std::string& key) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) return {"", key};
    return {key.substr(0, dot), key.substr(dot + 1)};
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unterminated section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value, got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": empty key");
        }
        cfg.values_[section][key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string Config::serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, entries] : values_) {
        if (entries.empty()) continue;
        if (!first) out << '\n';
        first = false;
        if (!section.empty()) out << '[' << section << "]\n";
        for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    }
    return out.str();
}

void Config::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << serialize();
}

std::optional<std::string> Config::find(const std::string& key) const {
    const auto [section, name] = split_key(key);
    const auto sec = values_.find(section);
    if (sec == values_.end()) return std::nullopt;
    const auto it = sec->second.find(name);
    if (it == sec->second.end()) return std::nullopt;
    return it->second;
}

bool Config::has(const std::string& key) const { return find(key).has_value(); }

void Config::set(const std::string& key, const std::string& value) {
    const auto [section, name] = split_key(key);
    values_[section][name] = value;
}

std::string Config::get_string(const std::string& key) const {
    const auto v = find(key);
    if (!v) throw std::runtime_error("missing config key '" + key + "'");
    return *v;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "' is not a number: '" + v + "'");
    }
}

long Config::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "' is not an integer: '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::string Config::get_string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}
double Config::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}
long Config::get_int_or(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}
bool Config::get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

}  // namespace drcorl
