#pragma once

#include <map>
#include <optional>
#include <string>

namespace drcorl {

/// Flat key-value configuration with [section] headers. Keys are addressed
/// as "section.key". Serialization is canonical (sections and keys sorted),
/// so any parsed file re-serializes to a unique form.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::string& path);
    std::string serialize() const;
    void save(const std::string& path) const;

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    /// Typed getters throw std::runtime_error naming the key when it is
    /// missing or malformed. The _or variants fall back to a default.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_int_or(const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;

    bool operator==(const Config&) const = default;

private:
    // section -> key -> value; "" holds keys that appear before any section.
    std::map<std::string, std::map<std::string, std::string>> values_;

    std::optional<std::string> find(const std::string& key) const;
};

}  // namespace drcorl
