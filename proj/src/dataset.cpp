#include "bleocc/dataset.hpp"

#include "bleocc/error.hpp"
#include "bleocc/keyvalue.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace bleocc {

namespace {

constexpr std::string_view kDistancePrefix = "distance_cm.";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out << content;
    if (!out)
        throw Error("write failed for '" + path + "'");
}

bool parse_bool(std::string_view token, std::size_t line) {
    const auto t = trim(token);
    std::string lower(t);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "true" || lower == "1")
        return true;
    if (lower == "false" || lower == "0")
        return false;
    throw ParseError(line, "expected true/false, got '" + std::string(t) + "'");
}

int parse_fixed(std::string_view s, std::size_t line) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ParseError(line, "malformed timestamp field '" + std::string(s) + "'");
    return static_cast<int>(parse_int(s, line));
}

struct RecordKeyHash {
    std::size_t operator()(const RssiRecord& r) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        auto mix = [&h](std::size_t v) { h = (h ^ v) * 1099511628211ULL; };
        for (int v : r.rssi)
            mix(static_cast<std::size_t>(v + 1000));
        mix(r.occupancy ? 1 : 0);
        mix(static_cast<std::size_t>(r.count));
        return h;
    }
};

struct RecordKeyEq {
    bool operator()(const RssiRecord& a, const RssiRecord& b) const noexcept {
        return a.rssi == b.rssi && a.occupancy == b.occupancy && a.count == b.count;
    }
};

} // namespace

std::string format_timestamp(std::int64_t epoch_ms) {
    using namespace std::chrono;
    const sys_time<milliseconds> tp{milliseconds{epoch_ms}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss<milliseconds> tod{tp - day};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d %02lld:%02lld:%02lld.%03lld",
                  static_cast<unsigned>(ymd.day()), static_cast<unsigned>(ymd.month()),
                  static_cast<int>(ymd.year()), static_cast<long long>(tod.hours().count()),
                  static_cast<long long>(tod.minutes().count()),
                  static_cast<long long>(tod.seconds().count()),
                  static_cast<long long>(tod.subseconds().count()));
    return buf;
}

std::int64_t parse_timestamp(std::string_view text, std::size_t line) {
    const auto t = trim(text);
    if (t.find('/') == std::string_view::npos)
        return parse_int(t, line);

    // DD/MM/YYYY HH:MM:SS[.mmm]
    const auto space = t.find(' ');
    if (space == std::string_view::npos)
        throw ParseError(line, "malformed timestamp '" + std::string(t) + "'");
    const auto date = split(t.substr(0, space), '/');
    const auto time = split(trim(t.substr(space + 1)), ':');
    if (date.size() != 3 || time.size() != 3)
        throw ParseError(line, "malformed timestamp '" + std::string(t) + "'");

    std::string_view sec_field = time[2];
    int millis = 0;
    if (const auto dot = sec_field.find('.'); dot != std::string_view::npos) {
        auto frac = std::string(sec_field.substr(dot + 1));
        if (frac.empty() || frac.size() > 3)
            throw ParseError(line, "timestamp fraction must have 1-3 digits");
        frac.resize(3, '0');
        millis = parse_fixed(frac, line);
        sec_field = sec_field.substr(0, dot);
    }

    using namespace std::chrono;
    const year_month_day ymd{year{parse_fixed(date[2], line)},
                             month{static_cast<unsigned>(parse_fixed(date[1], line))},
                             day{static_cast<unsigned>(parse_fixed(date[0], line))}};
    const int hh = parse_fixed(time[0], line);
    const int mm = parse_fixed(time[1], line);
    const int ss = parse_fixed(sec_field, line);
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59)
        throw ParseError(line, "timestamp out of range '" + std::string(t) + "'");
    const auto tp = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + milliseconds{millis};
    return duration_cast<milliseconds>(tp.time_since_epoch()).count();
}

SidecarDescriptor parse_sidecar(std::string_view text) {
    const auto doc = KeyValueDoc::parse(text);
    SidecarDescriptor meta;
    bool have_rate = false;
    std::set<std::string> seen;
    for (const auto& e : doc.entries()) {
        if (e.key == "sampling_hz") {
            meta.sampling_hz = parse_double(e.value, e.line);
            if (meta.sampling_hz <= 0.0)
                throw ParseError(e.line, "sampling_hz must be positive");
            have_rate = true;
        } else if (e.key.starts_with(kDistancePrefix)) {
            auto id = e.key.substr(kDistancePrefix.size());
            if (id.empty())
                throw ParseError(e.line, "missing MAC address after 'distance_cm.'");
            if (!seen.insert(id).second)
                throw ParseError(e.line, "duplicate transmitter '" + id + "'");
            const auto d = parse_int(e.value, e.line);
            if (d <= 0)
                throw ParseError(e.line, "distance_cm must be positive");
            meta.transmitters.push_back({std::move(id), static_cast<int>(d)});
        } else {
            throw ParseError(e.line, "unknown sidecar key '" + e.key + "'");
        }
    }
    if (!have_rate)
        throw ParseError(0, "sidecar is missing sampling_hz");
    return meta;
}

std::string serialize_sidecar(const RssiDataset& dataset) {
    KeyValueDoc doc;
    std::ostringstream rate;
    rate.precision(17);
    rate << dataset.sampling_hz;
    doc.add("sampling_hz", rate.str());
    for (const auto& tx : dataset.transmitters)
        doc.add(std::string(kDistancePrefix) + tx.id, std::to_string(tx.distance_cm));
    return doc.to_string();
}

RssiDataset parse_dataset(std::string_view csv_text, const SidecarDescriptor& meta) {
    const auto lines = split(csv_text, '\n');
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty())
        ++first;
    if (first == lines.size())
        throw ParseError(1, "empty input, expected a header row");

    const auto header = split(trim(lines[first]), ',');
    const std::size_t header_line = first + 1;
    if (header.size() < 4)
        throw ParseError(header_line, "header needs timestamp, at least one MAC, occupancy, count");
    if (trim(header.front()) != "timestamp" || trim(header[header.size() - 2]) != "occupancy" ||
        trim(header.back()) != "count")
        throw ParseError(header_line, "header must be 'timestamp,<mac_1>,...,<mac_n>,occupancy,count'");

    RssiDataset dataset;
    dataset.sampling_hz = meta.sampling_hz;
    std::map<std::string, int> distances;
    for (const auto& tx : meta.transmitters)
        distances.emplace(tx.id, tx.distance_cm);

    std::set<std::string> ids;
    for (std::size_t i = 1; i + 2 < header.size(); ++i) {
        const std::string id(trim(header[i]));
        if (!ids.insert(id).second)
            throw ParseError(header_line, "duplicate MAC column '" + id + "'");
        const auto it = distances.find(id);
        if (it == distances.end())
            throw ParseError(header_line, "MAC '" + id + "' has no distance in the sidecar");
        dataset.transmitters.push_back({id, it->second});
    }
    for (const auto& tx : meta.transmitters)
        if (!ids.contains(tx.id))
            throw ParseError(header_line, "sidecar transmitter '" + tx.id + "' is not a CSV column");

    const std::size_t n_tx = dataset.transmitters.size();
    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto line = trim(lines[i]);
        if (line.empty())
            continue;
        const auto fields = split(line, ',');
        if (fields.size() != n_tx + 3)
            throw ParseError(line_no, "expected " + std::to_string(n_tx + 3) + " fields, got " +
                                          std::to_string(fields.size()));
        RssiRecord rec;
        rec.timestamp_ms = parse_timestamp(fields[0], line_no);
        rec.rssi.reserve(n_tx);
        for (std::size_t t = 0; t < n_tx; ++t) {
            const auto v = parse_int(fields[t + 1], line_no);
            if (v < kMinRssiDbm || v > kMaxRssiDbm)
                throw ParseError(line_no, "RSSI " + std::to_string(v) + " outside [-127, 0] dBm");
            rec.rssi.push_back(static_cast<int>(v));
        }
        rec.occupancy = parse_bool(fields[n_tx + 1], line_no);
        const auto count = parse_int(fields[n_tx + 2], line_no);
        if (count < 0)
            throw ParseError(line_no, "negative occupant count");
        rec.count = static_cast<int>(count);
        if (rec.occupancy != (rec.count > 0))
            throw ParseError(line_no, "label inconsistency: occupancy=" +
                                          std::string(rec.occupancy ? "true" : "false") +
                                          " with count=" + std::to_string(rec.count));
        if (!dataset.records.empty() && rec.timestamp_ms < dataset.records.back().timestamp_ms)
            throw ParseError(line_no, "timestamp earlier than the previous row");
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

std::string serialize_dataset(const RssiDataset& dataset) {
    std::string out = "timestamp";
    for (const auto& tx : dataset.transmitters)
        out += "," + tx.id;
    out += ",occupancy,count\n";
    for (const auto& rec : dataset.records) {
        out += format_timestamp(rec.timestamp_ms);
        for (int v : rec.rssi) {
            out += ',';
            out += std::to_string(v);
        }
        out += rec.occupancy ? ",true," : ",false,";
        out += std::to_string(rec.count);
        out += '\n';
    }
    return out;
}

std::string default_sidecar_path(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".meta");
    return p.string();
}

RssiDataset load_dataset(const std::string& csv_path, const std::string& sidecar_path) {
    const auto meta = parse_sidecar(read_file(sidecar_path));
    return parse_dataset(read_file(csv_path), meta);
}

void save_dataset(const RssiDataset& dataset, const std::string& csv_path,
                  const std::string& sidecar_path) {
    write_file(csv_path, serialize_dataset(dataset));
    write_file(sidecar_path, serialize_sidecar(dataset));
}

RssiDataset deduplicate(const RssiDataset& dataset) {
    RssiDataset out;
    out.transmitters = dataset.transmitters;
    out.sampling_hz = dataset.sampling_hz;
    std::unordered_set<RssiRecord, RecordKeyHash, RecordKeyEq> seen;
    seen.reserve(dataset.records.size());
    for (const auto& rec : dataset.records)
        if (seen.insert(rec).second)
            out.records.push_back(rec);
    return out;
}

std::string_view to_string(FindingKind kind) {
    switch (kind) {
    case FindingKind::Ordering: return "ordering";
    case FindingKind::VectorLength: return "vector length";
    case FindingKind::RssiRange: return "rssi range";
    case FindingKind::LabelConsistency: return "label consistency";
    case FindingKind::Transmitter: return "transmitter";
    case FindingKind::SamplingRate: return "sampling rate";
    }
    return "unknown";
}

ValidationReport validate(const RssiDataset& dataset) {
    ValidationReport report;
    auto add = [&report](FindingKind kind, std::size_t index, std::string msg) {
        report.findings.push_back({kind, index, std::move(msg)});
    };

    if (!(dataset.sampling_hz > 0.0))
        add(FindingKind::SamplingRate, 0, "sampling_hz must be positive");

    std::set<std::string> ids;
    for (std::size_t t = 0; t < dataset.transmitters.size(); ++t) {
        const auto& tx = dataset.transmitters[t];
        if (!ids.insert(tx.id).second)
            add(FindingKind::Transmitter, t, "duplicate transmitter id '" + tx.id + "'");
        if (tx.distance_cm <= 0)
            add(FindingKind::Transmitter, t, "distance_cm must be positive");
    }

    const std::size_t n_tx = dataset.transmitters.size();
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const auto& rec = dataset.records[i];
        if (i > 0 && rec.timestamp_ms < dataset.records[i - 1].timestamp_ms)
            add(FindingKind::Ordering, i, "timestamp earlier than the previous record");
        if (rec.rssi.size() != n_tx)
            add(FindingKind::VectorLength, i,
                "rssi vector has " + std::to_string(rec.rssi.size()) + " values, expected " +
                    std::to_string(n_tx));
        if (std::any_of(rec.rssi.begin(), rec.rssi.end(),
                        [](int v) { return v < kMinRssiDbm || v > kMaxRssiDbm; }))
            add(FindingKind::RssiRange, i, "rssi value outside [-127, 0] dBm");
        if (rec.count < 0 || rec.occupancy != (rec.count > 0))
            add(FindingKind::LabelConsistency, i, "occupancy does not match count > 0");
    }
    return report;
}

} // namespace bleocc
