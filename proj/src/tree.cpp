#include "bleocc/tree.hpp"

#include "bleocc/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace bleocc {

namespace {

struct NodeStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::vector<double> class_counts;
    double n = 0.0;
};

// Impurity in "sum" units (size-weighted), so decreases add up directly.
double impurity(const NodeStats& s, SplitCriterion c) {
    if (s.n <= 0.0)
        return 0.0;
    if (c == SplitCriterion::Variance)
        return std::max(0.0, s.sum_sq - s.sum * s.sum / s.n);
    double sq = 0.0;
    for (double k : s.class_counts)
        sq += k * k;
    return s.n - sq / s.n;
}

class Builder {
public:
    Builder(const Eigen::MatrixXd& X, std::span<const double> y, const TreeParams& p, Rng& rng,
            std::vector<double>* importance)
        : X_(X), y_(y), p_(p), rng_(rng), importance_(importance),
          features_(static_cast<std::size_t>(X.cols())) {
        std::iota(features_.begin(), features_.end(), 0);
        if (p.criterion == SplitCriterion::Gini) {
            int max_class = 0;
            for (double v : y) {
                if (v < 0 || v != std::floor(v))
                    throw ContractError("Gini trees need non-negative integer class labels");
                max_class = std::max(max_class, static_cast<int>(v));
            }
            n_classes_ = static_cast<std::size_t>(max_class) + 1;
        }
    }

    std::vector<TreeNode> build(std::vector<std::size_t> rows) {
        nodes_.clear();
        grow(std::move(rows), 0);
        return std::move(nodes_);
    }

private:
    NodeStats stats_of(const std::vector<std::size_t>& rows) const {
        NodeStats s;
        if (p_.criterion == SplitCriterion::Gini)
            s.class_counts.assign(n_classes_, 0.0);
        for (auto r : rows)
            add(s, y_[r]);
        return s;
    }

    void add(NodeStats& s, double v) const {
        s.n += 1.0;
        if (p_.criterion == SplitCriterion::Variance) {
            s.sum += v;
            s.sum_sq += v * v;
        } else {
            s.class_counts[static_cast<std::size_t>(v)] += 1.0;
        }
    }

    void remove(NodeStats& s, double v) const {
        s.n -= 1.0;
        if (p_.criterion == SplitCriterion::Variance) {
            s.sum -= v;
            s.sum_sq -= v * v;
        } else {
            s.class_counts[static_cast<std::size_t>(v)] -= 1.0;
        }
    }

    double leaf_value(const NodeStats& s) const {
        if (p_.criterion == SplitCriterion::Variance)
            return s.sum / s.n;
        const auto it = std::max_element(s.class_counts.begin(), s.class_counts.end());
        return static_cast<double>(it - s.class_counts.begin());
    }

    int grow(std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        const NodeStats parent = stats_of(rows);
        nodes_[id].value = leaf_value(parent);
        const double parent_imp = impurity(parent, p_.criterion);

        const std::size_t n = rows.size();
        if ((p_.max_depth > 0 && depth >= p_.max_depth) || n < 2 * p_.min_leaf || parent_imp <= 0.0)
            return id;

        // Candidate columns: a random subset, visited in ascending order.
        std::size_t m = features_.size();
        if (p_.max_features > 0 && p_.max_features < m) {
            for (std::size_t i = 0; i < p_.max_features; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
                std::swap(features_[i], features_[pick(rng_)]);
            }
            m = p_.max_features;
        }
        std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
        std::sort(candidates.begin(), candidates.end());

        double best_gain = 0.0;
        double best_threshold = 0.0;
        std::vector<std::size_t> tied;
        std::vector<std::pair<double, std::size_t>> order(n);

        for (auto f : candidates) {
            const auto col = static_cast<Eigen::Index>(f);
            for (std::size_t i = 0; i < n; ++i)
                order[i] = {X_(static_cast<Eigen::Index>(rows[i]), col), rows[i]};
            std::sort(order.begin(), order.end());
            if (order.front().first == order.back().first)
                continue;

            NodeStats left;
            if (p_.criterion == SplitCriterion::Gini)
                left.class_counts.assign(n_classes_, 0.0);
            NodeStats right = parent;
            double f_gain = 0.0;
            double f_threshold = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double v = y_[order[i].second];
                add(left, v);
                remove(right, v);
                if (order[i].first == order[i + 1].first)
                    continue;
                const std::size_t n_left = i + 1;
                if (n_left < p_.min_leaf || n - n_left < p_.min_leaf)
                    continue;
                const double gain =
                    parent_imp - impurity(left, p_.criterion) - impurity(right, p_.criterion);
                if (gain > f_gain) {
                    f_gain = gain;
                    f_threshold = 0.5 * (order[i].first + order[i + 1].first);
                    if (f_threshold >= order[i + 1].first) // midpoint rounded up
                        f_threshold = order[i].first;
                }
            }
            if (f_gain <= 0.0)
                continue;
            if (f_gain > best_gain) {
                best_gain = f_gain;
                best_threshold = f_threshold;
                tied.assign(1, f);
            } else if (f_gain == best_gain) {
                tied.push_back(f);
            }
        }

        if (tied.empty())
            return id;
        if (importance_)
            for (auto f : tied)
                (*importance_)[f] += best_gain / static_cast<double>(tied.size());

        const auto feature = tied.front();
        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows)
            (X_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(feature)) <= best_threshold
                 ? left_rows
                 : right_rows)
                .push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes_[id].feature = static_cast<int>(feature);
        nodes_[id].threshold = best_threshold;
        const int l = grow(std::move(left_rows), depth + 1);
        const int r = grow(std::move(right_rows), depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const Eigen::MatrixXd& X_;
    std::span<const double> y_;
    const TreeParams& p_;
    Rng& rng_;
    std::vector<double>* importance_;
    std::vector<std::size_t> features_;
    std::size_t n_classes_ = 0;
    std::vector<TreeNode> nodes_;
};

} // namespace

std::size_t FeatureSubset::resolve(std::size_t p) const {
    switch (rule) {
    case Rule::All: return 0;
    case Rule::Sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(p))));
    case Rule::Third: return std::max<std::size_t>(1, p / 3);
    case Rule::Fraction:
        return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * double(p))), 1, p);
    }
    return 0;
}

void DecisionTree::fit(const Eigen::MatrixXd& X, std::span<const double> y,
                       std::span<const std::size_t> rows, const TreeParams& params, Rng& rng,
                       std::vector<double>* importance) {
    if (rows.empty())
        throw ContractError("decision tree: no training rows");
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
        throw ContractError("decision tree: target length does not match rows");
    if (importance && importance->size() != static_cast<std::size_t>(X.cols()))
        importance->assign(static_cast<std::size_t>(X.cols()), 0.0);
    TreeParams p = params;
    p.min_leaf = std::max<std::size_t>(1, p.min_leaf);
    Builder builder(X, y, p, rng, importance);
    nodes_ = builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

double DecisionTree::predict(const Eigen::MatrixXd& X, Eigen::Index row) const {
    if (nodes_.empty())
        throw ContractError("decision tree: not fitted");
    int id = 0;
    while (nodes_[id].feature >= 0) {
        const auto& node = nodes_[id];
        id = X(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes_[id].value;
}

std::size_t DecisionTree::depth() const {
    if (nodes_.empty())
        return 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes_[id].feature >= 0) {
            stack.emplace_back(nodes_[id].left, d + 1);
            stack.emplace_back(nodes_[id].right, d + 1);
        }
    }
    return deepest;
}

void RandomForest::fit(const Eigen::MatrixXd& X, std::span<const double> y, const ForestParams& params) {
    if (params.n_trees == 0)
        throw ContractError("random forest: n_trees must be positive");
    const std::size_t n = static_cast<std::size_t>(X.rows());
    const std::size_t p = static_cast<std::size_t>(X.cols());
    if (n == 0 || p == 0)
        throw ContractError("random forest: empty training matrix");

    criterion_ = params.tree.criterion;
    trees_.assign(params.n_trees, DecisionTree{});
    std::vector<double> total(p, 0.0);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        Rng rng(sub_seed(params.seed, t));
        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (auto& r : rows)
                r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        std::vector<double> imp(p, 0.0);
        trees_[t].fit(X, y, rows, params.tree, rng, &imp);
        const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
        if (s > 0.0)
            for (std::size_t j = 0; j < p; ++j)
                total[j] += imp[j] / s;
    }
    const double s = std::accumulate(total.begin(), total.end(), 0.0);
    importances_.resize(p);
    for (std::size_t j = 0; j < p; ++j)
        importances_[j] = s > 0.0 ? total[j] / s : 1.0 / static_cast<double>(p);
}

double RandomForest::predict(const Eigen::MatrixXd& X, Eigen::Index row) const {
    if (trees_.empty())
        throw ContractError("random forest: not fitted");
    if (criterion_ == SplitCriterion::Variance) {
        double acc = 0.0;
        for (const auto& t : trees_)
            acc += t.predict(X, row);
        return acc / static_cast<double>(trees_.size());
    }
    std::map<double, std::size_t> votes;
    for (const auto& t : trees_)
        ++votes[t.predict(X, row)];
    double best = 0.0;
    std::size_t best_n = 0;
    for (const auto& [cls, n] : votes)
        if (n > best_n) {
            best = cls;
            best_n = n;
        }
    return best;
}

Eigen::VectorXd RandomForest::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out(i) = predict(X, i);
    return out;
}

RandomForest RandomForest::from_parts(std::vector<DecisionTree> trees, SplitCriterion criterion,
                                      std::vector<double> importances) {
    RandomForest f;
    f.trees_ = std::move(trees);
    f.criterion_ = criterion;
    f.importances_ = std::move(importances);
    return f;
}

} // namespace bleocc
