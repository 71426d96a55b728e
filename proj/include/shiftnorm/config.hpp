#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace shiftnorm {

// Flat TOML-style configuration: `[section]` headers, `key = value` lines,
// `#` comments. Values are integers, floats (inf allowed), booleans, quoted
// strings, or arrays of numbers/strings. Keys are addressed as
// "section.key"; a key read through one of the getters is marked consumed,
// and ensure_all_consumed() rejects anything left over, so typos in config
// files fail loudly.
class Config {
public:
    using Value = std::variant<std::int64_t, double, bool, std::string, std::vector<double>,
                               std::vector<std::string>>;

    static Config parse(const std::string& text);
    static Config parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::int64_t get_int(const std::string& key, std::int64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::string get_string(const std::string& key, const std::string& fallback);
    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);
    std::vector<std::string> get_string_list(const std::string& key,
                                             std::vector<std::string> fallback);

    // Explicit override (CLI flags); marks the key consumed.
    void set(const std::string& key, Value value);

    // Throws naming the first unconsumed key.
    void ensure_all_consumed() const;

    // Throws naming the first key not present in the registry. Lets one
    // config file carry sections for several commands while still rejecting
    // typos everywhere.
    void validate_keys(const std::set<std::string>& known) const;

    // The resolved key/value pairs in deterministic order, serialized back to
    // the same TOML-style syntax. Only consumed keys appear, with the values
    // actually used.
    std::string resolved_toml() const;

private:
    const Value* fetch(const std::string& key);
    void record(const std::string& key, const Value& value);

    std::map<std::string, Value> values_;
    std::set<std::string> consumed_;
    std::map<std::string, Value> resolved_;
};

} // namespace shiftnorm
