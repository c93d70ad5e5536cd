#pragma once

#include "bleocc/feature_matrix.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

// Per-column quartiles of the training data.
struct ScalerParams {
    std::vector<double> q1, q2, q3;

    std::size_t columns() const noexcept { return q2.size(); }
};

ScalerParams fit_scaler(const Eigen::MatrixXd& train);
inline ScalerParams fit_scaler(const FeatureMatrix& train) { return fit_scaler(train.values); }

// x' = (x - q2) / (q3 - q1); a zero interquartile range only centers.
Eigen::MatrixXd apply_scaler(const Eigen::MatrixXd& m, const ScalerParams& p);
FeatureMatrix apply_scaler(const FeatureMatrix& m, const ScalerParams& p);

enum class SelectionTask { Classification, Regression };

enum class ImportanceRule {
    AtLeastMean, // keep columns whose importance >= mean importance
};

struct SelectionConfig {
    SelectionTask task = SelectionTask::Classification;
    std::size_t n_trees = 100;
    std::size_t min_leaf = 1;
    ImportanceRule rule = ImportanceRule::AtLeastMean;
    std::uint64_t seed = 0;
};

struct SelectionMask {
    std::vector<std::size_t> kept;  // strictly increasing, never empty
    std::vector<double> importances; // one per original column, sums to 1
};

// Random-forest importances (Gini for classification, variance for
// regression); throws ContractError when the labels are degenerate.
SelectionMask select_features(const Eigen::MatrixXd& train, const Eigen::VectorXd& labels,
                              const SelectionConfig& config);

FeatureMatrix apply_selection(const FeatureMatrix& m, const SelectionMask& mask);

// Plain-text sidecar holding both, so a trained pipeline can be re-applied.
std::string serialize_preprocess(const ScalerParams& scaler, const SelectionMask* mask);
void parse_preprocess(std::string_view text, ScalerParams& scaler, SelectionMask& mask, bool& has_mask);

} // namespace bleocc
