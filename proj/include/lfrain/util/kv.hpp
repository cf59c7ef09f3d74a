#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

static_assert(sizeof(std::size_t) == sizeof(std::uint64_t));

namespace lfrain {

/// Flat `key = value` text with optional `[section]` headers. Keys inside a
/// section are stored as "section.key". Blank lines and lines starting with
/// '#' are ignored.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);

    void set(const std::string& key, std::string value);
    void set(const std::string& key, double value);
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value);

    bool has(const std::string& key) const { return values_.contains(key); }
    const std::string& str(const std::string& key) const;

    // Typed readers leave `out` untouched when the key is absent and throw
    // FormatError when the value does not parse.
    void read(const std::string& key, std::string& out) const;
    void read(const std::string& key, double& out) const;
    void read(const std::string& key, std::uint64_t& out) const;
    void read(const std::string& key, bool& out) const;

    /// Keys without a section first, then sections in first-use order.
    std::string serialize() const;

    const std::vector<std::string>& keys() const { return order_; }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

} // namespace lfrain
