#include "shiftnorm/config.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include "shiftnorm/csv.hpp"

namespace shiftnorm {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

bool looks_like_int(const std::string& s) {
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

Config::Value parse_scalar(const std::string& raw, const std::string& key) {
    if (raw.empty()) throw std::invalid_argument("config: empty value for key '" + key + "'");
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw std::invalid_argument("config: unterminated string for key '" + key + "'");
        return raw.substr(1, raw.size() - 2);
    }
    if (looks_like_int(raw)) return static_cast<std::int64_t>(std::stoll(raw));
    try {
        return parse_double(raw);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value '" + raw + "' for key '" + key + "'");
    }
}

Config::Value parse_array(const std::string& raw, const std::string& key) {
    const std::string inner = trim(raw.substr(1, raw.size() - 2));
    std::vector<std::string> items;
    if (!inner.empty())
        for (const auto& piece : split_line(inner, ',')) items.push_back(trim(piece));
    bool strings = !items.empty() && items.front().size() >= 2 && items.front().front() == '"';
    if (strings) {
        std::vector<std::string> out;
        for (const auto& item : items) {
            const auto v = parse_scalar(item, key);
            if (!std::holds_alternative<std::string>(v))
                throw std::invalid_argument("config: mixed array for key '" + key + "'");
            out.push_back(std::get<std::string>(v));
        }
        return out;
    }
    std::vector<double> out;
    for (const auto& item : items) {
        const auto v = parse_scalar(item, key);
        if (std::holds_alternative<std::int64_t>(v))
            out.push_back(static_cast<double>(std::get<std::int64_t>(v)));
        else if (std::holds_alternative<double>(v))
            out.push_back(std::get<double>(v));
        else
            throw std::invalid_argument("config: mixed array for key '" + key + "'");
    }
    return out;
}

std::string value_to_toml(const Config::Value& value) {
    struct Printer {
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return '"' + v + '"'; }
        std::string operator()(const std::vector<double>& v) const {
            std::string out = "[";
            for (std::size_t i = 0; i < v.size(); ++i)
                out += (i ? ", " : "") + format_double(v[i]);
            return out + "]";
        }
        std::string operator()(const std::vector<std::string>& v) const {
            std::string out = "[";
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", \"" : "\"") + v[i] + '"';
            return out + "]";
        }
    };
    return std::visit(Printer{}, value);
}

} // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("config: bad section header at line " +
                                            std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key = value at line " +
                                        std::to_string(line_no));
        const std::string name = trim(line.substr(0, eq));
        const std::string raw = trim(line.substr(eq + 1));
        if (name.empty())
            throw std::invalid_argument("config: empty key at line " + std::to_string(line_no));
        const std::string key = section.empty() ? name : section + "." + name;
        if (cfg.values_.count(key))
            throw std::invalid_argument("config: duplicate key '" + key + "'");
        cfg.values_[key] = (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']')
                               ? parse_array(raw, key)
                               : parse_scalar(raw, key);
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) { return parse(read_text_file(path)); }

const Config::Value* Config::fetch(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
}

void Config::record(const std::string& key, const Value& value) { resolved_[key] = value; }

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) {
    std::int64_t out = fallback;
    if (const Value* v = fetch(key)) {
        if (!std::holds_alternative<std::int64_t>(*v))
            throw std::invalid_argument("config: key '" + key + "' must be an integer");
        out = std::get<std::int64_t>(*v);
    }
    record(key, out);
    return out;
}

double Config::get_double(const std::string& key, double fallback) {
    double out = fallback;
    if (const Value* v = fetch(key)) {
        if (std::holds_alternative<std::int64_t>(*v))
            out = static_cast<double>(std::get<std::int64_t>(*v));
        else if (std::holds_alternative<double>(*v))
            out = std::get<double>(*v);
        else
            throw std::invalid_argument("config: key '" + key + "' must be a number");
    }
    record(key, out);
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) {
    bool out = fallback;
    if (const Value* v = fetch(key)) {
        if (!std::holds_alternative<bool>(*v))
            throw std::invalid_argument("config: key '" + key + "' must be a boolean");
        out = std::get<bool>(*v);
    }
    record(key, out);
    return out;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
    std::string out = fallback;
    if (const Value* v = fetch(key)) {
        if (!std::holds_alternative<std::string>(*v))
            throw std::invalid_argument("config: key '" + key + "' must be a string");
        out = std::get<std::string>(*v);
    }
    record(key, out);
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key, std::vector<double> fallback) {
    std::vector<double> out = std::move(fallback);
    if (const Value* v = fetch(key)) {
        if (!std::holds_alternative<std::vector<double>>(*v))
            throw std::invalid_argument("config: key '" + key + "' must be a number array");
        out = std::get<std::vector<double>>(*v);
    }
    record(key, out);
    return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key,
                                                 std::vector<std::string> fallback) {
    std::vector<std::string> out = std::move(fallback);
    if (const Value* v = fetch(key)) {
        if (!std::holds_alternative<std::vector<std::string>>(*v))
            throw std::invalid_argument("config: key '" + key + "' must be a string array");
        out = std::get<std::vector<std::string>>(*v);
    }
    record(key, out);
    return out;
}

void Config::set(const std::string& key, Value value) {
    values_[key] = value;
    consumed_.insert(key);
    record(key, value);
}

void Config::ensure_all_consumed() const {
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
}

void Config::validate_keys(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_)
        if (!known.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string Config::resolved_toml() const {
    // Top-level keys first, then sections; std::map already orders keys.
    std::ostringstream out;
    for (const auto& [key, value] : resolved_)
        if (key.find('.') == std::string::npos)
            out << key << " = " << value_to_toml(value) << '\n';
    std::string section;
    for (const auto& [key, value] : resolved_) {
        const auto dot = key.rfind('.');
        if (dot == std::string::npos) continue;
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out << '\n' << '[' << sec << "]\n";
            section = sec;
        }
        out << key.substr(dot + 1) << " = " << value_to_toml(value) << '\n';
    }
    return out.str();
}

} // namespace shiftnorm
