#pragma once

#include "bleocc/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bleocc {

enum class SplitCriterion { Gini, Variance };

struct TreeParams {
    SplitCriterion criterion = SplitCriterion::Variance;
    int max_depth = 0;            // 0 = unlimited
    std::size_t min_leaf = 1;
    std::size_t max_features = 0; // candidate columns per node; 0 = all
};

// How many candidate columns a forest tree examines per node.
struct FeatureSubset {
    enum class Rule { All, Sqrt, Third, Fraction };
    Rule rule = Rule::All;
    double fraction = 1.0;

    // Number of columns out of p (at least 1); 0 means all.
    std::size_t resolve(std::size_t p) const;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf prediction: mean target, or majority class for Gini
};

// CART tree. Splits go left when x[feature] <= threshold. When several
// columns reach exactly the same best impurity decrease, the decrease is
// credited to all of them in equal shares and the lowest index is used.
class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    // `rows` selects (possibly repeated) training rows. Impurity decreases,
    // weighted by node size, are added into `importance` when non-null.
    void fit(const Eigen::MatrixXd& X, std::span<const double> y, std::span<const std::size_t> rows,
             const TreeParams& params, Rng& rng, std::vector<double>* importance = nullptr);

    double predict(const Eigen::MatrixXd& X, Eigen::Index row) const;

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t depth() const;

private:
    std::vector<TreeNode> nodes_;
};

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

class RandomForest {
public:
    RandomForest() = default;

    void fit(const Eigen::MatrixXd& X, std::span<const double> y, const ForestParams& params);

    // Mean of the trees (Variance) or majority vote, ties to the smaller class (Gini).
    double predict(const Eigen::MatrixXd& X, Eigen::Index row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

    // Normalized mean impurity decrease per column; sums to 1.
    const std::vector<double>& importances() const noexcept { return importances_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    SplitCriterion criterion() const noexcept { return criterion_; }

    static RandomForest from_parts(std::vector<DecisionTree> trees, SplitCriterion criterion,
                                   std::vector<double> importances);

private:
    std::vector<DecisionTree> trees_;
    std::vector<double> importances_;
    SplitCriterion criterion_ = SplitCriterion::Variance;
};

} // namespace bleocc
