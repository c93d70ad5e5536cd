#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace bleocc {

void KnnClassifier::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    index_classes(y, 2);
    X_ = X;
    y_ = y;
}

Eigen::VectorXd KnnClassifier::predict(const Eigen::MatrixXd& X) const {
    if (X_.rows() == 0)
        throw ContractError("kNN: not fitted");
    if (X.cols() != X_.cols())
        throw ContractError("kNN: column count mismatch");
    const auto n = static_cast<std::size_t>(X_.rows());
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);

    Eigen::VectorXd out(X.rows());
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (Eigen::Index q = 0; q < X.rows(); ++q) {
        for (std::size_t i = 0; i < n; ++i)
            dist[i] = {(X_.row(Eigen::Index(i)) - X.row(q)).squaredNorm(), i};
        // (distance, index) pairs: equal distances resolve to the earlier training row.
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

        std::map<double, double> votes;
        std::map<double, std::size_t> first_seen; // rank of the nearest neighbour of each class
        for (std::size_t r = 0; r < k; ++r) {
            const double label = y_(Eigen::Index(dist[r].second));
            const double w = weighted_ ? 1.0 / (std::sqrt(dist[r].first) + kWeightEpsilon) : 1.0;
            votes[label] += w;
            first_seen.emplace(label, r);
        }
        double best = 0.0, best_votes = -1.0;
        std::size_t best_rank = n;
        for (const auto& [label, v] : votes) {
            const auto rank = first_seen[label];
            if (v > best_votes || (v == best_votes && rank < best_rank)) {
                best = label;
                best_votes = v;
                best_rank = rank;
            }
        }
        out(q) = best;
    }
    return out;
}

nlohmann::json KnnClassifier::save() const { return {{"X", to_json(X_)}, {"y", to_json(y_)}}; }

void KnnClassifier::load(const nlohmann::json& state) {
    X_ = matrix_from_json(state.at("X"));
    y_ = vector_from_json(state.at("y"));
}

} // namespace bleocc
