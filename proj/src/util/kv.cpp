#include "lfrain/util/kv.hpp"

#include "lfrain/errors.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace lfrain {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw FormatError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
        kv.set(section.empty() ? key : section + "." + key, trim(t.substr(eq + 1)));
    }
    return kv;
}

void KeyValues::set(const std::string& key, std::string value) {
    if (!values_.contains(key)) order_.push_back(key);
    values_[key] = std::move(value);
}
void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValues::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
void KeyValues::set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

const std::string& KeyValues::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw FormatError("missing key '" + key + "'");
    return it->second;
}

void KeyValues::read(const std::string& key, std::string& out) const {
    if (has(key)) out = str(key);
}

void KeyValues::read(const std::string& key, double& out) const {
    if (!has(key)) return;
    const std::string& s = str(key);
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw FormatError("key '" + key + "': '" + s + "' is not a number");
    }
    out = v;
}

void KeyValues::read(const std::string& key, std::uint64_t& out) const {
    if (!has(key)) return;
    const std::string& s = str(key);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw FormatError("key '" + key + "': '" + s + "' is not a non-negative integer");
    }
    out = v;
}

void KeyValues::read(const std::string& key, bool& out) const {
    if (!has(key)) return;
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "on") out = true;
    else if (s == "false" || s == "0" || s == "off") out = false;
    else throw FormatError("key '" + key + "': '" + s + "' is not a boolean");
}

std::string KeyValues::serialize() const {
    std::ostringstream os;
    std::vector<std::string> sections;
    for (const std::string& k : order_) {
        const auto dot = k.find('.');
        if (dot == std::string::npos) {
            os << k << " = " << values_.at(k) << '\n';
            continue;
        }
        const std::string sec = k.substr(0, dot);
        if (std::find(sections.begin(), sections.end(), sec) == sections.end()) sections.push_back(sec);
    }
    for (const std::string& sec : sections) {
        os << "\n[" << sec << "]\n";
        for (const std::string& k : order_) {
            if (k.size() > sec.size() && k.compare(0, sec.size() + 1, sec + ".") == 0) {
                os << k.substr(sec.size() + 1) << " = " << values_.at(k) << '\n';
            }
        }
    }
    return os.str();
}

} // namespace lfrain
