#include "bleocc/keyvalue.hpp"

#include "bleocc/error.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace bleocc {

std::string_view trim(std::string_view s) noexcept {
    constexpr std::string_view ws = " \t\r\n";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(std::string_view token, std::size_t line) {
    const auto t = trim(token);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(value))
        throw ParseError(line, "expected a number, got '" + std::string(t) + "'");
    return value;
}

long long parse_int(std::string_view token, std::size_t line) {
    auto t = trim(token);
    if (!t.empty() && t.front() == '+')
        t.remove_prefix(1);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw ParseError(line, "expected an integer, got '" + std::string(t) + "'");
    return value;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
    KeyValueDoc doc;
    const auto lines = split(text, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(i + 1, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty())
            throw ParseError(i + 1, "empty key");
        doc.entries_.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), i + 1});
    }
    return doc;
}

const KeyValueEntry* KeyValueDoc::find(std::string_view key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->key == key)
            return &*it;
    return nullptr;
}

std::vector<const KeyValueEntry*> KeyValueDoc::find_all(std::string_view key) const {
    std::vector<const KeyValueEntry*> out;
    for (const auto& e : entries_)
        if (e.key == key)
            out.push_back(&e);
    return out;
}

std::optional<double> KeyValueDoc::get_double(std::string_view key) const {
    if (const auto* e = find(key))
        return parse_double(e->value, e->line);
    return std::nullopt;
}

std::optional<long long> KeyValueDoc::get_int(std::string_view key) const {
    if (const auto* e = find(key))
        return parse_int(e->value, e->line);
    return std::nullopt;
}

void KeyValueDoc::add(std::string key, std::string value) {
    entries_.push_back({std::move(key), std::move(value), entries_.size() + 1});
}

std::string KeyValueDoc::to_string() const {
    std::ostringstream out;
    for (const auto& e : entries_)
        out << e.key << " = " << e.value << '\n';
    return out.str();
}

} // namespace bleocc
