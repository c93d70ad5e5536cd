#include "bleocc/features.hpp"

#include "bleocc/error.hpp"
#include "bleocc/stats.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <tuple>

namespace bleocc {

namespace {

constexpr std::size_t kArOrder = 4;
constexpr std::size_t kEcdfPoints = 10;
constexpr std::size_t kFftBins = 10;
constexpr std::size_t kBands = 4;
constexpr double kHighBandHz = 3.5;

bool degenerate_variance(double m2, double mean) {
    return m2 <= 1e-20 * std::max(1.0, mean * mean);
}

// Mean-removed copy; exactly zero when the input has no spread.
std::vector<double> centered(std::span<const double> x) {
    const double m = stats::mean(x);
    std::vector<double> c(x.size());
    double m2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        c[i] = x[i] - m;
        m2 += c[i] * c[i];
    }
    m2 /= static_cast<double>(x.size());
    if (degenerate_variance(m2, m))
        std::fill(c.begin(), c.end(), 0.0);
    return c;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

// Yule-Walker via Levinson-Durbin recursion.
std::array<double, kArOrder> yule_walker(std::span<const double> c) {
    std::array<double, kArOrder> phi{};
    const std::size_t n = c.size();
    std::array<double, kArOrder + 1> r{};
    for (std::size_t k = 0; k <= kArOrder; ++k) {
        double acc = 0.0;
        for (std::size_t t = 0; t + k < n; ++t)
            acc += c[t] * c[t + k];
        r[k] = acc / static_cast<double>(n);
    }
    if (r[0] <= 0.0)
        return phi;

    double err = r[0];
    for (std::size_t k = 1; k <= kArOrder; ++k) {
        double acc = r[k];
        for (std::size_t j = 1; j < k; ++j)
            acc -= phi[j - 1] * r[k - j];
        if (err <= 1e-14 * r[0])
            break;
        const double kappa = acc / err;
        std::array<double, kArOrder> next = phi;
        next[k - 1] = kappa;
        for (std::size_t j = 1; j < k; ++j)
            next[j - 1] = phi[j - 1] - kappa * phi[k - j - 1];
        phi = next;
        err *= (1.0 - kappa * kappa);
    }
    return phi;
}

} // namespace

const std::array<std::string_view, kTimeFeatureCount>& time_feature_names() {
    static const std::array<std::string_view, kTimeFeatureCount> names = {
        "max", "min", "mean", "std", "rms", "range", "median", "skewness", "kurtosis",
        "time_weighted_variance", "iqr",
        "ecdf_0", "ecdf_1", "ecdf_2", "ecdf_3", "ecdf_4", "ecdf_5", "ecdf_6", "ecdf_7", "ecdf_8",
        "ecdf_9",
        "p10", "p25", "p75", "p90",
        "sum_below_p10", "sum_below_p25", "sum_above_p75", "sum_above_p90",
        "mean_amplitude_deviation", "mean_power_deviation",
        "ar_1", "ar_2", "ar_3", "ar_4"};
    return names;
}

const std::array<std::string_view, kFreqFeatureCount>& freq_feature_names() {
    static const std::array<std::string_view, kFreqFeatureCount> names = {
        "fft_mag_1", "fft_mag_2", "fft_mag_3", "fft_mag_4", "fft_mag_5",
        "fft_mag_6", "fft_mag_7", "fft_mag_8", "fft_mag_9", "fft_mag_10",
        "dominant_freq_hz", "dominant_power_ratio", "power_ratio_above_3p5hz",
        "dwt_detail_energy_1", "dwt_detail_energy_2", "dwt_detail_energy_3",
        "wavelet_entropy",
        "band_energy_1", "band_energy_2", "band_energy_3", "band_energy_4"};
    return names;
}

std::vector<double> time_features(std::span<const double> x, std::span<const std::int64_t> times_ms) {
    const std::size_t n = x.size();
    if (n < 2)
        throw ContractError("time_features needs at least 2 samples");
    if (!times_ms.empty() && times_ms.size() != n)
        throw ContractError("time_features: timestamps and samples differ in length");
    const double nd = static_cast<double>(n);

    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double mx = sorted.back();
    const double mn = sorted.front();
    const double mean = stats::mean(x);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0, sq = 0.0, mad = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        sq += v * v;
        mad += std::abs(d);
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    mad /= nd;
    const bool flat = degenerate_variance(m2, mean);
    if (flat)
        m2 = 0.0;
    const double sd = std::sqrt(m2);
    const double skew = flat ? 0.0 : m3 / std::pow(m2, 1.5);
    const double kurt = flat ? 0.0 : m4 / (m2 * m2) - 3.0;

    double twv = m2;
    if (!times_ms.empty() && !flat) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i + 1 < n; ++i)
            w[i] = static_cast<double>(times_ms[i + 1] - times_ms[i]);
        w[n - 1] = w[n - 2];
        const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
        if (wsum > 0.0) {
            double wm = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                wm += w[i] * x[i];
            wm /= wsum;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                acc += w[i] * (x[i] - wm) * (x[i] - wm);
            twv = acc / wsum;
        }
    }

    const double p10 = stats::quantile_sorted(sorted, 0.10);
    const double p25 = stats::quantile_sorted(sorted, 0.25);
    const double p50 = stats::quantile_sorted(sorted, 0.50);
    const double p75 = stats::quantile_sorted(sorted, 0.75);
    const double p90 = stats::quantile_sorted(sorted, 0.90);

    std::vector<double> out;
    out.reserve(kTimeFeatureCount);
    out.insert(out.end(), {mx, mn, mean, sd, std::sqrt(sq / nd), mx - mn, p50, skew, kurt, twv,
                           p75 - p25});

    for (std::size_t j = 0; j < kEcdfPoints; ++j) {
        const double at = j + 1 == kEcdfPoints
                              ? mx
                              : mn + (mx - mn) * static_cast<double>(j) / double(kEcdfPoints - 1);
        const auto le = std::upper_bound(sorted.begin(), sorted.end(), at) - sorted.begin();
        out.push_back(static_cast<double>(le) / nd);
    }

    out.insert(out.end(), {p10, p25, p75, p90});

    double below10 = 0.0, below25 = 0.0, above75 = 0.0, above90 = 0.0;
    double mean_sq = sq / nd, mpd = 0.0;
    for (double v : x) {
        if (v < p10) below10 += v;
        if (v < p25) below25 += v;
        if (v > p75) above75 += v;
        if (v > p90) above90 += v;
        mpd += std::abs(v * v - mean_sq);
    }
    out.insert(out.end(), {below10, below25, above75, above90, flat ? 0.0 : mad, mpd / nd});

    const auto c = centered(x);
    const auto phi = yule_walker(c);
    out.insert(out.end(), phi.begin(), phi.end());
    return out;
}

std::vector<double> hann_windowed(std::span<const double> x) {
    auto c = centered(x);
    const std::size_t n = c.size();
    if (n < 2)
        return c;
    for (std::size_t i = 0; i < n; ++i)
        c[i] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n - 1));
    return c;
}

Spectrum power_spectrum(std::span<const double> x, double sampling_hz) {
    if (x.size() < 2)
        throw ContractError("power_spectrum needs at least 2 samples");
    if (!(sampling_hz > 0.0))
        throw ContractError("power_spectrum needs a positive sampling rate");
    auto signal = hann_windowed(x);
    const std::size_t n = next_pow2(signal.size());
    signal.resize(n, 0.0);

    std::vector<std::complex<double>> bins;
    Eigen::FFT<double> fft;
    fft.fwd(bins, signal);

    Spectrum s;
    s.fft_length = n;
    const std::size_t half = n / 2;
    const double nd = static_cast<double>(n);
    for (std::size_t k = 0; k <= half; ++k) {
        const double mag2 = std::norm(bins[k]);
        const bool mirrored = k != 0 && k != half;
        s.freq_hz.push_back(static_cast<double>(k) * sampling_hz / nd);
        s.power.push_back(mag2 / (nd * nd) * (mirrored ? 2.0 : 1.0));
        s.magnitude.push_back(std::sqrt(mag2) / nd);
    }
    return s;
}

std::array<double, 4> haar_level_energies(std::span<const double> x) {
    auto approx = centered(x);
    const std::size_t padded = std::max<std::size_t>(8, (approx.size() + 7) / 8 * 8);
    approx.resize(padded, 0.0);

    std::array<double, 4> energies{};
    for (std::size_t level = 0; level < 3; ++level) {
        std::vector<double> next(approx.size() / 2);
        double detail = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            const double a = approx[2 * i], b = approx[2 * i + 1];
            next[i] = (a + b) / std::numbers::sqrt2;
            const double d = (a - b) / std::numbers::sqrt2;
            detail += d * d;
        }
        energies[level] = detail;
        approx = std::move(next);
    }
    energies[3] = std::inner_product(approx.begin(), approx.end(), approx.begin(), 0.0);
    return energies;
}

FreqFeatures freq_features(std::span<const double> x, double sampling_hz) {
    if (x.size() < 4)
        throw ContractError("freq_features needs at least 4 samples");
    const auto s = power_spectrum(x, sampling_hz);

    FreqFeatures out;
    auto& v = out.values;
    v.reserve(kFreqFeatureCount);
    for (std::size_t k = 1; k <= kFftBins; ++k)
        v.push_back(k < s.magnitude.size() ? s.magnitude[k] : 0.0);

    const double total = std::accumulate(s.power.begin(), s.power.end(), 0.0);
    std::size_t dom = 0;
    for (std::size_t k = 1; k < s.power.size(); ++k)
        if (s.power[k] > (dom == 0 ? 0.0 : s.power[dom]))
            dom = k;
    const bool silent = !(total > 0.0) || dom == 0;
    v.push_back(silent ? 0.0 : s.freq_hz[dom]);
    v.push_back(silent ? 0.0 : s.power[dom] / total);

    if (sampling_hz <= 2.0 * kHighBandHz) {
        out.high_band_ratio_undefined = true;
        v.push_back(0.0);
    } else {
        double high = 0.0;
        for (std::size_t k = 0; k < s.power.size(); ++k)
            if (s.freq_hz[k] > kHighBandHz)
                high += s.power[k];
        v.push_back(total > 0.0 ? high / total : 0.0);
    }

    const auto e = haar_level_energies(x);
    v.insert(v.end(), {e[0], e[1], e[2]});
    const double etotal = e[0] + e[1] + e[2] + e[3];
    double entropy = 0.0;
    if (etotal > 0.0)
        for (double ei : e)
            if (ei > 0.0) {
                const double p = ei / etotal;
                entropy -= p * std::log(p);
            }
    v.push_back(entropy);

    std::array<double, kBands> bands{};
    const double width = sampling_hz / 2.0 / static_cast<double>(kBands);
    for (std::size_t k = 0; k < s.power.size(); ++k) {
        const auto b = std::min(kBands - 1, static_cast<std::size_t>(s.freq_hz[k] / width));
        bands[b] += s.power[k];
    }
    v.insert(v.end(), bands.begin(), bands.end());
    return out;
}

Segmentation segment(const RssiDataset& dataset, double window_s) {
    if (!(window_s > 0.0) || !(dataset.sampling_hz > 0.0))
        throw ContractError("segment: window length and sampling rate must be positive");
    const auto length = static_cast<std::size_t>(std::llround(window_s * dataset.sampling_hz));
    if (length < 2)
        throw ContractError("segment: a window must hold at least 2 samples");
    const std::size_t n_windows = dataset.records.size() / length;
    if (n_windows == 0)
        throw ContractError("segment: dataset shorter than one window (" +
                            std::to_string(dataset.records.size()) + " records, window of " +
                            std::to_string(length) + ")");

    Segmentation seg;
    seg.sampling_hz = dataset.sampling_hz;
    seg.window_length = length;
    const std::size_t n_tx = dataset.transmitters.size();
    for (const auto& tx : dataset.transmitters)
        seg.transmitter_ids.push_back(tx.id);

    seg.windows.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        Window win;
        win.samples.assign(n_tx, std::vector<double>(length));
        win.times_ms.resize(length);
        std::size_t occupied = 0;
        std::map<int, std::size_t> votes;
        for (std::size_t i = 0; i < length; ++i) {
            const auto& rec = dataset.records[w * length + i];
            if (rec.rssi.size() != n_tx)
                throw ContractError("segment: record with wrong RSSI vector length");
            for (std::size_t t = 0; t < n_tx; ++t)
                win.samples[t][i] = rec.rssi[t];
            win.times_ms[i] = rec.timestamp_ms;
            occupied += rec.occupancy ? 1 : 0;
            ++votes[rec.count];
        }
        win.start_ms = win.times_ms.front();
        win.label_occupancy = 2 * occupied >= length;
        std::size_t best_votes = 0;
        for (const auto& [count, n] : votes)
            if (n >= best_votes) { // ascending keys: ties go to the larger count
                best_votes = n;
                win.label_count = count;
            }
        seg.windows.push_back(std::move(win));
    }
    return seg;
}

FeatureMatrix build_feature_matrix(const Segmentation& seg) {
    if (seg.windows.empty())
        throw ContractError("build_feature_matrix: no windows");
    const std::size_t n_tx = seg.transmitter_ids.size();
    const std::size_t cols = n_tx * kFeaturesPerTransmitter;

    FeatureMatrix m;
    m.feature_names.reserve(cols);
    for (const auto& id : seg.transmitter_ids) {
        for (auto name : time_feature_names())
            m.feature_names.push_back(id + "/" + std::string(name));
        for (auto name : freq_feature_names())
            m.feature_names.push_back(id + "/" + std::string(name));
    }

    m.values.resize(static_cast<Eigen::Index>(seg.windows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t w = 0; w < seg.windows.size(); ++w) {
        const auto& win = seg.windows[w];
        if (win.samples.size() != n_tx)
            throw ContractError("build_feature_matrix: windows are not homogeneous");
        std::size_t col = 0;
        for (std::size_t t = 0; t < n_tx; ++t) {
            if (win.samples[t].size() != seg.window_length)
                throw ContractError("build_feature_matrix: windows are not homogeneous");
            const auto tf = time_features(win.samples[t], win.times_ms);
            const auto ff = freq_features(win.samples[t], seg.sampling_hz);
            for (double v : tf)
                m.values(Eigen::Index(w), Eigen::Index(col++)) = v;
            for (double v : ff.values)
                m.values(Eigen::Index(w), Eigen::Index(col++)) = v;
        }
        m.labels_occupancy.push_back(win.label_occupancy ? 1 : 0);
        m.labels_count.push_back(win.label_count);
    }
    for (Eigen::Index i = 0; i < m.values.size(); ++i) {
        double& v = m.values.data()[i];
        if (!std::isfinite(v)) {
            v = 0.0;
            ++m.nonfinite_replaced;
        }
    }
    return m;
}

FeatureMatrix build_raw_matrix(const RssiDataset& dataset) {
    if (dataset.records.empty())
        throw ContractError("build_raw_matrix: no records");
    const std::size_t n_tx = dataset.transmitters.size();
    FeatureMatrix m;
    for (const auto& tx : dataset.transmitters)
        m.feature_names.push_back(tx.id);
    m.values.resize(static_cast<Eigen::Index>(dataset.records.size()), static_cast<Eigen::Index>(n_tx));
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const auto& rec = dataset.records[i];
        if (rec.rssi.size() != n_tx)
            throw ContractError("build_raw_matrix: record with wrong RSSI vector length");
        for (std::size_t t = 0; t < n_tx; ++t)
            m.values(Eigen::Index(i), Eigen::Index(t)) = rec.rssi[t];
        m.labels_occupancy.push_back(rec.occupancy ? 1 : 0);
        m.labels_count.push_back(rec.count);
    }
    return m;
}

Eigen::VectorXd FeatureMatrix::occupancy_targets() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(labels_occupancy.size()));
    for (std::size_t i = 0; i < labels_occupancy.size(); ++i)
        y(Eigen::Index(i)) = labels_occupancy[i];
    return y;
}

Eigen::VectorXd FeatureMatrix::count_targets() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(labels_count.size()));
    for (std::size_t i = 0; i < labels_count.size(); ++i)
        y(Eigen::Index(i)) = labels_count[i];
    return y;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.feature_names = feature_names;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows())
            throw ContractError("select_rows: index out of range");
        out.values.row(Eigen::Index(i)) = values.row(Eigen::Index(idx[i]));
        out.labels_occupancy.push_back(labels_occupancy[idx[i]]);
        out.labels_count.push_back(labels_count[idx[i]]);
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_cols(std::span<const std::size_t> idx) const {
    FeatureMatrix out;
    out.labels_occupancy = labels_occupancy;
    out.labels_count = labels_count;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= cols())
            throw ContractError("select_cols: index out of range");
        out.values.col(Eigen::Index(j)) = values.col(Eigen::Index(idx[j]));
        out.feature_names.push_back(feature_names[idx[j]]);
    }
    return out;
}

void FeatureMatrix::check() const {
    if (feature_names.size() != cols())
        throw ContractError("feature matrix: names and columns disagree");
    if (labels_occupancy.size() != rows() || labels_count.size() != rows())
        throw ContractError("feature matrix: labels and rows disagree");
    if (!values.allFinite())
        throw ContractError("feature matrix: non-finite value");
}

std::string FeatureMatrix::to_csv() const {
    std::string out;
    for (const auto& name : feature_names) {
        out += name;
        out += ',';
    }
    out += "occupancy,count\n";
    char buf[32];
    for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t j = 0; j < cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", values(Eigen::Index(i), Eigen::Index(j)));
            out += buf;
            out += ',';
        }
        out += labels_occupancy[i] ? "true," : "false,";
        out += std::to_string(labels_count[i]);
        out += '\n';
    }
    return out;
}

FeatureMatrix deduplicate_rows(const FeatureMatrix& m) {
    std::set<std::tuple<std::vector<double>, int, int>> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.values.row(Eigen::Index(i)).begin(), m.values.row(Eigen::Index(i)).end());
        if (seen.emplace(std::move(row), m.labels_occupancy[i], m.labels_count[i]).second)
            keep.push_back(i);
    }
    return m.select_rows(keep);
}

} // namespace bleocc
