#include "bleocc/simulator.hpp"

#include "bleocc/error.hpp"
#include "bleocc/keyvalue.hpp"
#include "bleocc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace bleocc {

namespace {

std::string fmt_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

// Enough simultaneous people for any realistic schedule; motion parameters
// for person j are drawn up front so they do not depend on the schedule.
std::size_t max_count(const std::vector<OccupancyEvent>& schedule) {
    int m = 0;
    for (const auto& e : schedule)
        m = std::max(m, e.count);
    return static_cast<std::size_t>(m);
}

} // namespace

double mean_rssi(double distance_cm, const PathLossParams& path_loss) {
    if (!(distance_cm > 0.0))
        throw ContractError("mean_rssi: distance must be positive");
    if (!(path_loss.d0_cm > 0.0))
        throw ContractError("mean_rssi: reference distance must be positive");
    return path_loss.pl0_dbm_at_d0 -
           10.0 * path_loss.exponent * std::log10(distance_cm / path_loss.d0_cm);
}

int count_at(const std::vector<OccupancyEvent>& schedule, double t) {
    int count = 0;
    for (const auto& e : schedule) {
        if (e.time_s > t)
            break;
        count = e.count;
    }
    return count;
}

std::vector<OccupancyEvent> cycling_schedule(const std::vector<int>& counts, double period_s,
                                             double duration_s) {
    if (counts.empty() || !(period_s > 0.0))
        throw ContractError("cycling_schedule: need counts and a positive period");
    std::vector<OccupancyEvent> events;
    for (std::size_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * period_s;
        if (t >= duration_s)
            break;
        events.push_back({t, counts[i % counts.size()]});
    }
    return events;
}

void check_scenario(const ScenarioConfig& c) {
    if (c.transmitters.empty())
        throw ContractError("scenario has no transmitters");
    std::set<std::string> ids;
    for (const auto& tx : c.transmitters) {
        if (tx.id.empty() || tx.id.find(',') != std::string::npos)
            throw ContractError("transmitter id must be non-empty and contain no commas");
        if (!ids.insert(tx.id).second)
            throw ContractError("duplicate transmitter id '" + tx.id + "'");
        if (tx.distance_cm <= 0)
            throw ContractError("transmitter '" + tx.id + "' needs a positive distance");
    }
    if (!(c.sampling_hz > 0.0))
        throw ContractError("sampling_hz must be positive");
    if (!(c.duration_s > 0.0))
        throw ContractError("duration_s must be positive");
    double prev = -1.0;
    for (const auto& e : c.schedule) {
        if (e.count < 0)
            throw ContractError("invalid schedule: negative occupant count");
        if (e.time_s < 0.0 || e.time_s >= c.duration_s)
            throw ContractError("invalid schedule: event time outside [0, duration_s)");
        if (e.time_s < prev)
            throw ContractError("invalid schedule: events are not time-ordered");
        prev = e.time_s;
    }
    const auto& pl = c.path_loss;
    if (!(pl.d0_cm > 0.0) || pl.exponent < 1.0 || pl.shadow_sigma_db < 0.0)
        throw ContractError("invalid path loss parameters");
    const auto& b = c.body_effect;
    if (b.atten_db_per_person < 0.0 || b.extra_sigma_db_per_person < 0.0 || b.motion_amp_db < 0.0)
        throw ContractError("invalid body effect parameters");
}

RssiDataset simulate(const ScenarioConfig& config) {
    check_scenario(config);

    RssiDataset out;
    out.transmitters = config.transmitters;
    out.sampling_hz = config.sampling_hz;

    const auto n_records =
        static_cast<std::size_t>(std::floor(config.duration_s * config.sampling_hz + 1e-9));
    const std::size_t n_tx = config.transmitters.size();
    const std::size_t n_people = max_count(config.schedule);

    std::vector<double> link_mean(n_tx);
    for (std::size_t t = 0; t < n_tx; ++t)
        link_mean[t] = mean_rssi(config.transmitters[t].distance_cm, config.path_loss);

    // Per-person motion frequency, and a phase per (person, link).
    std::vector<double> person_freq(n_people);
    std::vector<double> person_phase(n_people * n_tx);
    {
        Rng rng(sub_seed(config.seed, "people"));
        std::uniform_real_distribution<double> freq(0.5, 3.0);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (std::size_t j = 0; j < n_people; ++j) {
            person_freq[j] = freq(rng);
            for (std::size_t t = 0; t < n_tx; ++t)
                person_phase[j * n_tx + t] = phase(rng);
        }
    }

    std::vector<Rng> link_rng;
    link_rng.reserve(n_tx);
    for (std::size_t t = 0; t < n_tx; ++t)
        link_rng.emplace_back(sub_seed(config.seed, t));
    std::vector<std::normal_distribution<double>> link_gauss(n_tx);

    const auto& body = config.body_effect;
    out.records.reserve(n_records);
    for (std::size_t i = 0; i < n_records; ++i) {
        const double t_s = static_cast<double>(i) / config.sampling_hz;
        const int count = count_at(config.schedule, t_s);

        RssiRecord rec;
        rec.timestamp_ms = config.start_ms + std::llround(1000.0 * t_s);
        rec.count = count;
        rec.occupancy = count > 0;
        rec.rssi.resize(n_tx);
        const double sigma = config.path_loss.shadow_sigma_db + body.extra_sigma_db_per_person * count;
        for (std::size_t t = 0; t < n_tx; ++t) {
            double motion = 0.0;
            for (int j = 0; j < count; ++j)
                motion += body.motion_amp_db *
                          std::sin(2.0 * std::numbers::pi * person_freq[j] * t_s +
                                   person_phase[static_cast<std::size_t>(j) * n_tx + t]);
            const double z = link_gauss[t](link_rng[t]);
            const double v = link_mean[t] - body.atten_db_per_person * count + sigma * z + motion;
            const double clamped = std::clamp(v, double(kMinRssiDbm), double(kMaxRssiDbm));
            rec.rssi[t] = static_cast<int>(std::lround(clamped));
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

ScenarioConfig parse_scenario(std::string_view text) {
    const auto doc = KeyValueDoc::parse(text);
    ScenarioConfig c;
    c.schedule.clear();
    std::vector<int> cycle_counts;
    double cycle_period = 0.0;
    const KeyValueEntry* cycle_entry = nullptr;

    auto pair_of = [](const KeyValueEntry& e) {
        const auto parts = split(e.value, ',');
        if (parts.size() != 2)
            throw ParseError(e.line, "'" + e.key + "' expects two comma-separated values");
        return std::pair<std::string, std::string>(std::string(trim(parts[0])),
                                                   std::string(trim(parts[1])));
    };

    for (const auto& e : doc.entries()) {
        const auto& k = e.key;
        if (k == "sampling_hz")
            c.sampling_hz = parse_double(e.value, e.line);
        else if (k == "duration_s")
            c.duration_s = parse_double(e.value, e.line);
        else if (k == "seed")
            c.seed = static_cast<std::uint64_t>(parse_int(e.value, e.line));
        else if (k == "start_ms")
            c.start_ms = parse_int(e.value, e.line);
        else if (k == "transmitter") {
            auto [id, dist] = pair_of(e);
            c.transmitters.push_back({id, static_cast<int>(parse_int(dist, e.line))});
        } else if (k == "event") {
            auto [t, n] = pair_of(e);
            c.schedule.push_back({parse_double(t, e.line), static_cast<int>(parse_int(n, e.line))});
        } else if (k == "cycle_period_s") {
            cycle_period = parse_double(e.value, e.line);
            cycle_entry = &e;
        } else if (k == "cycle_counts") {
            cycle_counts.clear();
            std::istringstream in(e.value);
            std::string tok;
            while (in >> tok)
                cycle_counts.push_back(static_cast<int>(parse_int(tok, e.line)));
            cycle_entry = &e;
        } else if (k == "path_loss.pl0_dbm")
            c.path_loss.pl0_dbm_at_d0 = parse_double(e.value, e.line);
        else if (k == "path_loss.d0_cm")
            c.path_loss.d0_cm = parse_double(e.value, e.line);
        else if (k == "path_loss.exponent")
            c.path_loss.exponent = parse_double(e.value, e.line);
        else if (k == "path_loss.shadow_sigma_db")
            c.path_loss.shadow_sigma_db = parse_double(e.value, e.line);
        else if (k == "body.atten_db_per_person")
            c.body_effect.atten_db_per_person = parse_double(e.value, e.line);
        else if (k == "body.extra_sigma_db_per_person")
            c.body_effect.extra_sigma_db_per_person = parse_double(e.value, e.line);
        else if (k == "body.motion_amp_db")
            c.body_effect.motion_amp_db = parse_double(e.value, e.line);
        else
            throw ParseError(e.line, "unknown scenario key '" + k + "'");
    }

    if (cycle_entry) {
        if (!c.schedule.empty())
            throw ParseError(cycle_entry->line, "use either 'event' lines or a cycle, not both");
        if (cycle_counts.empty() || !(cycle_period > 0.0))
            throw ParseError(cycle_entry->line, "a cycle needs cycle_period_s > 0 and cycle_counts");
        c.schedule = cycling_schedule(cycle_counts, cycle_period, c.duration_s);
    }
    return c;
}

std::string serialize_scenario(const ScenarioConfig& c) {
    KeyValueDoc doc;
    doc.add("sampling_hz", fmt_double(c.sampling_hz));
    doc.add("duration_s", fmt_double(c.duration_s));
    doc.add("seed", std::to_string(c.seed));
    doc.add("start_ms", std::to_string(c.start_ms));
    for (const auto& tx : c.transmitters)
        doc.add("transmitter", tx.id + ", " + std::to_string(tx.distance_cm));
    for (const auto& e : c.schedule)
        doc.add("event", fmt_double(e.time_s) + ", " + std::to_string(e.count));
    doc.add("path_loss.pl0_dbm", fmt_double(c.path_loss.pl0_dbm_at_d0));
    doc.add("path_loss.d0_cm", fmt_double(c.path_loss.d0_cm));
    doc.add("path_loss.exponent", fmt_double(c.path_loss.exponent));
    doc.add("path_loss.shadow_sigma_db", fmt_double(c.path_loss.shadow_sigma_db));
    doc.add("body.atten_db_per_person", fmt_double(c.body_effect.atten_db_per_person));
    doc.add("body.extra_sigma_db_per_person", fmt_double(c.body_effect.extra_sigma_db_per_person));
    doc.add("body.motion_amp_db", fmt_double(c.body_effect.motion_amp_db));
    return doc.to_string();
}

} // namespace bleocc
