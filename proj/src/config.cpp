#include "fpimpute/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fpimpute {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

std::string strip_comment(const std::string& line) {
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quotes = !in_quotes;
        if (line[i] == '#' && !in_quotes) return line.substr(0, i);
    }
    return line;
}

}  // namespace

Config Config::parse(std::istream& in) {
    Config cfg;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(strip_comment(line));
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value': " + t);
        const auto key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
        cfg.values_[section.empty() ? key : section + "." + key] = unquote(trim(t.substr(eq + 1)));
    }
    return cfg;
}

Config Config::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in);
}

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw ConfigError("config key '" + key + "' expects a number, got '" + *v + "'");
    return out;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw ConfigError("config key '" + key + "' expects an integer, got '" + *v + "'");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    auto v = get(key);
    if (!v) return {};
    std::string s = trim(*v);
    if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = unquote(trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_list(key)) {
        double d = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), d);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw ConfigError("config key '" + key + "' expects numbers, got '" + item + "'");
        out.push_back(d);
    }
    return out;
}

Config Config::subtree(const std::string& prefix) const {
    Config out;
    const auto p = prefix + ".";
    for (const auto& [k, v] : values_)
        if (k.compare(0, p.size(), p) == 0) out.values_[k.substr(p.size())] = v;
    return out;
}

std::set<std::string> Config::children(const std::string& prefix) const {
    std::set<std::string> out;
    for (const auto& [k, v] : subtree(prefix).values_) out.insert(k.substr(0, k.find('.')));
    return out;
}

}  // namespace fpimpute
