#pragma once

#include "bleocc/dataset.hpp"
#include "bleocc/features.hpp"
#include "bleocc/rng.hpp"
#include "bleocc/simulator.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace testutil {

inline bleocc::ScenarioConfig small_scenario(double hz = 45.0, double duration_s = 60.0, std::uint64_t seed = 7) {
    bleocc::ScenarioConfig c;
    c.transmitters = {{"AA:BB:CC:DD:EE:01", 25}, {"AA:BB:CC:DD:EE:02", 500}, {"AA:BB:CC:DD:EE:03", 100}};
    c.sampling_hz = hz;
    c.duration_s = duration_s;
    c.schedule = bleocc::cycling_schedule({0, 1, 2, 3}, 5.0, duration_s);
    c.path_loss = {-45.0, 100.0, 2.2, 1.0};
    c.body_effect = {6.0, 0.0, 0.0};
    c.seed = seed;
    return c;
}

inline bleocc::RssiDataset random_dataset(bleocc::Rng& rng, std::size_t n_tx, std::size_t n_rec) {
    bleocc::RssiDataset d;
    d.sampling_hz = 45.0;
    for (std::size_t t = 0; t < n_tx; ++t) {
        char mac[32];
        std::snprintf(mac, sizeof mac, "0A:1B:2C:3D:4E:%02zX", t);
        d.transmitters.push_back({mac, int(10 + 37 * t)});
    }
    std::uniform_int_distribution<int> rssi(-127, 0), count(0, 4), gap(0, 40);
    std::int64_t ts = 1598435805005;
    for (std::size_t i = 0; i < n_rec; ++i) {
        bleocc::RssiRecord r;
        ts += gap(rng);
        r.timestamp_ms = ts;
        for (std::size_t t = 0; t < n_tx; ++t)
            r.rssi.push_back(rssi(rng));
        r.count = count(rng);
        r.occupancy = r.count > 0;
        d.records.push_back(r);
    }
    return d;
}

inline std::size_t feature_column(std::string_view name) {
    const auto& t = bleocc::time_feature_names();
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] == name)
            return i;
    const auto& f = bleocc::freq_feature_names();
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] == name)
            return t.size() + i;
    throw std::runtime_error("no feature " + std::string(name));
}

inline std::size_t time_index(std::string_view name) { return feature_column(name); }
inline std::size_t freq_index(std::string_view name) {
    return feature_column(name) - bleocc::time_feature_names().size();
}

inline Eigen::MatrixXd random_matrix(bleocc::Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            m(i, j) = u(rng);
    return m;
}

} // namespace testutil
