#pragma once

#include "bleocc/dataset.hpp"
#include "bleocc/feature_matrix.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

struct Window {
    std::int64_t start_ms = 0;
    std::vector<std::vector<double>> samples; // [transmitter][sample], all of length L
    std::vector<std::int64_t> times_ms;       // one per sample
    bool label_occupancy = false;
    int label_count = 0;
};

struct Segmentation {
    std::vector<std::string> transmitter_ids;
    double sampling_hz = 0.0;
    std::size_t window_length = 0;
    std::vector<Window> windows;
};

// Consecutive non-overlapping windows of L = round(window_s * sampling_hz)
// records; a trailing partial window is dropped. Labels are majority votes
// (occupancy ties -> true, count ties -> larger count).
Segmentation segment(const RssiDataset& dataset, double window_s = 1.0);

inline constexpr std::size_t kTimeFeatureCount = 35;
inline constexpr std::size_t kFreqFeatureCount = 21;
inline constexpr std::size_t kFeaturesPerTransmitter = kTimeFeatureCount + kFreqFeatureCount;

const std::array<std::string_view, kTimeFeatureCount>& time_feature_names();
const std::array<std::string_view, kFreqFeatureCount>& freq_feature_names();

// Statistical features of one transmitter's window. `times_ms`, when given,
// weights the time-weighted variance by the inter-sample gaps; otherwise
// samples are taken as uniformly spaced.
std::vector<double> time_features(std::span<const double> x,
                                  std::span<const std::int64_t> times_ms = {});

struct FreqFeatures {
    std::vector<double> values;
    // sampling_hz <= 7 leaves no band above 3.5 Hz; that ratio is reported as 0.
    bool high_band_ratio_undefined = false;
};

FreqFeatures freq_features(std::span<const double> x, double sampling_hz);

// One-sided power spectrum of the mean-removed, Hann-windowed signal,
// zero-padded to the next power of two. power[k] sums to the mean power
// (sum of squares / fft_length) of that padded signal.
struct Spectrum {
    std::size_t fft_length = 0;
    std::vector<double> freq_hz;
    std::vector<double> power;
    std::vector<double> magnitude; // |X_k| / fft_length
};

Spectrum power_spectrum(std::span<const double> x, double sampling_hz);

// The signal fed to the FFT: mean-removed and Hann-windowed (unpadded).
std::vector<double> hann_windowed(std::span<const double> x);

// Detail energies of levels 1..3 followed by the level-3 approximation energy
// of the Haar transform of the mean-removed signal (zero-padded to a multiple of 8).
std::array<double, 4> haar_level_energies(std::span<const double> x);

FeatureMatrix build_feature_matrix(const Segmentation& segmentation);

// Raw representation: one row per record, the RSSI vector as features.
FeatureMatrix build_raw_matrix(const RssiDataset& dataset);

} // namespace bleocc
