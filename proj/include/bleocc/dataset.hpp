#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

inline constexpr int kMinRssiDbm = -127;
inline constexpr int kMaxRssiDbm = 0;

struct TransmitterMeta {
    std::string id; // MAC address, opaque
    int distance_cm = 0;

    bool operator==(const TransmitterMeta&) const = default;
};

struct RssiRecord {
    std::int64_t timestamp_ms = 0; // milliseconds since the Unix epoch, UTC
    std::vector<int> rssi;         // dBm, one per transmitter, in transmitter order
    bool occupancy = false;
    int count = 0;

    bool operator==(const RssiRecord&) const = default;
};

struct RssiDataset {
    std::vector<TransmitterMeta> transmitters;
    std::vector<RssiRecord> records;
    double sampling_hz = 0.0;

    bool operator==(const RssiDataset&) const = default;
};

// Sidecar descriptor: nominal sampling rate plus the receiver distance of
// every transmitter. Text form:
//
//   sampling_hz = 45
//   distance_cm.AA:BB:CC:DD:EE:01 = 25
struct SidecarDescriptor {
    double sampling_hz = 0.0;
    std::vector<TransmitterMeta> transmitters;
};

SidecarDescriptor parse_sidecar(std::string_view text);
std::string serialize_sidecar(const RssiDataset& dataset);

// CSV with header `timestamp,<mac_1>,...,<mac_n>,occupancy,count`. Timestamps
// are accepted as `DD/MM/YYYY HH:MM:SS.mmm` (UTC) or as integer epoch
// milliseconds. Throws ParseError naming the offending line.
RssiDataset parse_dataset(std::string_view csv_text, const SidecarDescriptor& meta);

// Always writes timestamps in the `DD/MM/YYYY HH:MM:SS.mmm` form.
std::string serialize_dataset(const RssiDataset& dataset);

RssiDataset load_dataset(const std::string& csv_path, const std::string& sidecar_path);
void save_dataset(const RssiDataset& dataset, const std::string& csv_path,
                  const std::string& sidecar_path);

// `<stem>.meta` next to the CSV.
std::string default_sidecar_path(const std::string& csv_path);

std::string format_timestamp(std::int64_t epoch_ms);
std::int64_t parse_timestamp(std::string_view text, std::size_t line);

// Keeps the first occurrence of every (rssi..., occupancy, count) tuple.
// The timestamp is not part of the key.
RssiDataset deduplicate(const RssiDataset& dataset);

enum class FindingKind {
    Ordering,
    VectorLength,
    RssiRange,
    LabelConsistency,
    Transmitter,
    SamplingRate,
};

std::string_view to_string(FindingKind kind);

struct Finding {
    FindingKind kind;
    std::size_t index; // record index, or transmitter index for Transmitter findings
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const noexcept { return findings.empty(); }
};

ValidationReport validate(const RssiDataset& dataset);

} // namespace bleocc
