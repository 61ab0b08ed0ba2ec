#pragma once

#include "fpimpute/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fpimpute {

// Flat key-value configuration in a TOML-like syntax:
//
//   # comment
//   seed = 7
//   [generative]            # later keys become generative.<key>
//   epochs = 100
//   methods = [mean, zero]  # lists: brackets optional, comma separated
//
// Keys are dotted paths. Values are kept as strings and converted on access.
class Config {
public:
    static Config parse(std::istream& in);
    static Config parse_string(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::optional<std::string> get(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // Keys under `prefix.` with the prefix stripped.
    Config subtree(const std::string& prefix) const;
    // Distinct first path components under `prefix.`.
    std::set<std::string> children(const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace fpimpute
