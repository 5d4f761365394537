#include "qbsde/keyvalue.hpp"

#include "qbsde/errors.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qbsde {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

} // namespace

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
    KeyValueDoc doc;
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view raw = text.substr(start, end - start);
        start = end + 1;

        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string line = trim(raw);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        if (doc.entries_.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
        doc.entries_.emplace(std::move(key), std::move(value));
        if (end == text.size()) break;
    }
    return doc;
}

KeyValueDoc KeyValueDoc::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void KeyValueDoc::set(const std::string& key, std::string value) {
    entries_[key] = std::move(value);
}

bool KeyValueDoc::contains(const std::string& key) const {
    return entries_.count(key) != 0;
}

const std::string& KeyValueDoc::require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw MissingKeyError(key);
    consumed_.insert(key);
    return it->second;
}

std::optional<std::string> KeyValueDoc::find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second;
}

double KeyValueDoc::require_real(const std::string& key) const {
    return parse_real(key, require(key));
}

std::optional<double> KeyValueDoc::find_real(const std::string& key) const {
    auto v = find(key);
    if (!v) return std::nullopt;
    return parse_real(key, *v);
}

long long KeyValueDoc::require_int(const std::string& key) const {
    return parse_int(key, require(key));
}

std::optional<long long> KeyValueDoc::find_int(const std::string& key) const {
    auto v = find(key);
    if (!v) return std::nullopt;
    return parse_int(key, *v);
}

std::vector<std::string> KeyValueDoc::unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (!consumed_.count(k)) out.push_back(k);
    return out;
}

void KeyValueDoc::reject_unknown() const {
    auto extra = unconsumed();
    if (extra.empty()) return;
    std::string msg = "unknown key(s):";
    for (const auto& k : extra) msg += " " + k;
    throw ConfigError(msg);
}

double parse_real(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError(key + ": expected a real number");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw ConfigError(key + ": expected a finite real number, got '" + t + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw ConfigError(key + ": expected an integer, got '" + t + "'");
    return v;
}

} // namespace qbsde
