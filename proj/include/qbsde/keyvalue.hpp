#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qbsde {

/// Flat `key = value` document. Lines may be grouped under `[section]`
/// headers, which prefix the following keys with `section.`; `#` starts a
/// comment. Duplicate keys are rejected.
class KeyValueDoc {
public:
    static KeyValueDoc parse(std::string_view text);
    static KeyValueDoc load(const std::string& path);

    void set(const std::string& key, std::string value);
    bool contains(const std::string& key) const;

    // Typed accessors mark the key as consumed.
    const std::string& require(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;
    double require_real(const std::string& key) const;
    std::optional<double> find_real(const std::string& key) const;
    long long require_int(const std::string& key) const;
    std::optional<long long> find_int(const std::string& key) const;

    /// Keys that no accessor has touched.
    std::vector<std::string> unconsumed() const;
    /// Throws ConfigError listing every unconsumed key.
    void reject_unknown() const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> consumed_;
};

double parse_real(const std::string& key, const std::string& text);
long long parse_int(const std::string& key, const std::string& text);

} // namespace qbsde
