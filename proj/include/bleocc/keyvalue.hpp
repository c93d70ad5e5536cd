#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

// Plain-text `key = value` documents. `#` starts a comment, blank lines are
// ignored, and keys may repeat (order is preserved).
struct KeyValueEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

class KeyValueDoc {
public:
    static KeyValueDoc parse(std::string_view text);

    const std::vector<KeyValueEntry>& entries() const noexcept { return entries_; }

    // Last entry with this key, if any.
    const KeyValueEntry* find(std::string_view key) const;
    std::vector<const KeyValueEntry*> find_all(std::string_view key) const;

    std::optional<double> get_double(std::string_view key) const;
    std::optional<long long> get_int(std::string_view key) const;

    void add(std::string key, std::string value);
    std::string to_string() const;

private:
    std::vector<KeyValueEntry> entries_;
};

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

// Strict numeric parsing of a whole token; throws ParseError(line, ...) on junk.
double parse_double(std::string_view token, std::size_t line);
long long parse_int(std::string_view token, std::size_t line);

} // namespace bleocc
