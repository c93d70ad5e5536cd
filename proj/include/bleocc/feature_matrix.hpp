#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bleocc {

// Rows are windows (or records for the raw representation); columns are
// named `<mac>/<feature>` (or `<mac>` for raw RSSI).
struct FeatureMatrix {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd values;
    std::vector<int> labels_occupancy; // 0 = empty, 1 = occupied
    std::vector<int> labels_count;
    std::size_t nonfinite_replaced = 0;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }

    Eigen::VectorXd occupancy_targets() const;
    Eigen::VectorXd count_targets() const;

    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
    FeatureMatrix select_cols(std::span<const std::size_t> cols) const;

    // Throws ContractError when shapes or labels disagree or a value is not finite.
    void check() const;

    // Header `<names...>,occupancy,count`; values printed round-trippably.
    std::string to_csv() const;
};

// Keeps the first occurrence of every (row values, labels) tuple.
FeatureMatrix deduplicate_rows(const FeatureMatrix& m);

} // namespace bleocc
