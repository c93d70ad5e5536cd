#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"

#include <numeric>

namespace bleocc {

void ForestRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size())
        throw ContractError("RandomForest: target length does not match rows");
    ForestParams p = params_;
    p.tree.criterion = SplitCriterion::Variance;
    p.tree.max_features = subset_.resolve(static_cast<std::size_t>(X.cols()));
    forest_.fit(X, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), p);
}

Eigen::VectorXd ForestRegressor::predict(const Eigen::MatrixXd& X) const { return forest_.predict(X); }

nlohmann::json ForestRegressor::save() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : forest_.trees())
        trees.push_back(tree_to_json(t));
    return {{"trees", trees}, {"importances", forest_.importances()}};
}

void ForestRegressor::load(const nlohmann::json& state) {
    std::vector<DecisionTree> trees;
    for (const auto& t : state.at("trees"))
        trees.push_back(tree_from_json(t));
    forest_ = RandomForest::from_parts(std::move(trees), SplitCriterion::Variance,
                                       state.at("importances").get<std::vector<double>>());
}

void BoostingRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size())
        throw ContractError("GradientBoosting: target length does not match rows");
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);

    TreeParams tp = tree_;
    tp.criterion = SplitCriterion::Variance;
    Rng rng(seed_);

    init_ = y.mean();
    Eigen::VectorXd f = Eigen::VectorXd::Constant(X.rows(), init_);
    std::vector<double> resid(n);
    trees_.clear();
    loss_.assign(1, (y - f).squaredNorm() / double(n));
    for (std::size_t round = 0; round < n_rounds_; ++round) {
        for (std::size_t i = 0; i < n; ++i)
            resid[i] = y(Eigen::Index(i)) - f(Eigen::Index(i));
        DecisionTree tree;
        tree.fit(X, resid, rows, tp, rng);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            f(i) += learning_rate_ * tree.predict(X, i);
        trees_.push_back(std::move(tree));
        loss_.push_back((y - f).squaredNorm() / double(n));
    }
}

Eigen::VectorXd BoostingRegressor::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), init_);
    for (const auto& t : trees_)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out(i) += learning_rate_ * t.predict(X, i);
    return out;
}

nlohmann::json BoostingRegressor::save() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_)
        trees.push_back(tree_to_json(t));
    return {{"init", init_}, {"learning_rate", learning_rate_}, {"trees", trees}};
}

void BoostingRegressor::load(const nlohmann::json& state) {
    init_ = state.at("init").get<double>();
    learning_rate_ = state.at("learning_rate").get<double>();
    trees_.clear();
    for (const auto& t : state.at("trees"))
        trees_.push_back(tree_from_json(t));
    loss_.clear();
}

} // namespace bleocc
