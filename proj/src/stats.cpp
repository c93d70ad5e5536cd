#include "bleocc/stats.hpp"

#include "bleocc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bleocc::stats {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty())
        throw ContractError("quantile of an empty sequence");
    q = std::clamp(q, 0.0, 1.0);
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, q);
}

double mean(std::span<const double> values) {
    if (values.empty())
        throw ContractError("mean of an empty sequence");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values) {
    const double m = mean(values);
    double acc = 0.0;
    for (double v : values)
        acc += (v - m) * (v - m);
    return acc / static_cast<double>(values.size());
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

} // namespace bleocc::stats
