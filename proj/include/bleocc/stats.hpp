#pragma once

#include <span>
#include <vector>

namespace bleocc::stats {

// Linear interpolation between closest ranks (h = (n - 1) q), the same
// convention everywhere percentiles or quartiles are taken.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::span<const double> values, double q);

double mean(std::span<const double> values);
double population_variance(std::span<const double> values);
double median(std::span<const double> values);

} // namespace bleocc::stats
