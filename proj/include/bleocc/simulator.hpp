#pragma once

#include "bleocc/dataset.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

// Log-distance path loss: mean received power at distance d is
// pl0 - 10 * exponent * log10(d / d0).
struct PathLossParams {
    double pl0_dbm_at_d0 = -45.0;
    double d0_cm = 100.0;
    double exponent = 2.0;
    double shadow_sigma_db = 1.0;
};

// How people in the room perturb every link.
struct BodyEffectParams {
    double atten_db_per_person = 0.0;
    double extra_sigma_db_per_person = 0.0;
    double motion_amp_db = 0.0;
};

struct OccupancyEvent {
    double time_s = 0.0;
    int count = 0;

    bool operator==(const OccupancyEvent&) const = default;
};

struct ScenarioConfig {
    std::vector<TransmitterMeta> transmitters;
    double sampling_hz = 45.0;
    double duration_s = 60.0;
    std::vector<OccupancyEvent> schedule; // empty room until the first event
    PathLossParams path_loss;
    BodyEffectParams body_effect;
    std::uint64_t seed = 0;
    std::int64_t start_ms = 1598435805005; // 26/08/2020 09:56:45.005 UTC
};

double mean_rssi(double distance_cm, const PathLossParams& path_loss);

// Occupant count in effect at time t (seconds from the scenario start).
int count_at(const std::vector<OccupancyEvent>& schedule, double t);

// Events every `period_s` seconds cycling through `counts`, starting at t = 0.
std::vector<OccupancyEvent> cycling_schedule(const std::vector<int>& counts, double period_s,
                                             double duration_s);

// Throws ContractError describing the first problem found.
void check_scenario(const ScenarioConfig& config);

RssiDataset simulate(const ScenarioConfig& config);

// Key-value scenario file. Recognised keys:
//   sampling_hz, duration_s, seed, start_ms
//   transmitter = <mac>, <distance_cm>           (repeatable)
//   event = <time_s>, <count>                    (repeatable)
//   cycle_period_s, cycle_counts = 0 1 2 3       (alternative to events)
//   path_loss.pl0_dbm, path_loss.d0_cm, path_loss.exponent, path_loss.shadow_sigma_db
//   body.atten_db_per_person, body.extra_sigma_db_per_person, body.motion_amp_db
ScenarioConfig parse_scenario(std::string_view text);
std::string serialize_scenario(const ScenarioConfig& config);

} // namespace bleocc
