#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace bleocc {

namespace {

struct Factored {
    Eigen::MatrixXd precision;
    double log_det = 0.0;
    bool regularized = false;
};

// Inverts a covariance matrix, adding eps * I with eps = 1e-6 * trace / dim
// when it is singular (or numerically so).
Factored factor_covariance(Eigen::MatrixXd cov) {
    const auto dim = cov.rows();
    Factored f;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
        const double trace = cov.trace();
        const double eps = trace > 0.0 ? 1e-6 * trace / static_cast<double>(dim) : 1e-6;
        cov.diagonal().array() += eps;
        f.regularized = true;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw ContractError("discriminant: covariance is not positive definite after regularization");
    f.precision = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    f.log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return f;
}

} // namespace

void DiscriminantClassifier::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const auto ci = index_classes(y, 2);
    const std::size_t k = ci.classes.size();
    const auto n = X.rows();
    const auto d = X.cols();

    classes_ = ci.classes;
    means_.assign(k, Eigen::VectorXd::Zero(d));
    std::vector<double> counts(k, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(ci.codes[static_cast<std::size_t>(i)]);
        means_[c] += X.row(i).transpose();
        counts[c] += 1.0;
    }
    for (std::size_t c = 0; c < k; ++c)
        means_[c] /= counts[c];

    std::vector<Eigen::MatrixXd> scatter(k, Eigen::MatrixXd::Zero(d, d));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(ci.codes[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd diff = X.row(i).transpose() - means_[c];
        scatter[c].selfadjointView<Eigen::Lower>().rankUpdate(diff);
    }
    for (auto& s : scatter)
        s = s.selfadjointView<Eigen::Lower>();

    log_priors_.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        log_priors_[c] = std::log(counts[c] / static_cast<double>(n));

    precisions_.clear();
    log_dets_.clear();
    regularized_ = false;
    if (!quadratic_) {
        Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
        for (const auto& s : scatter)
            pooled += s;
        const double dof = static_cast<double>(n) - static_cast<double>(k);
        pooled /= dof > 0.0 ? dof : static_cast<double>(n);
        auto f = factor_covariance(std::move(pooled));
        regularized_ = f.regularized;
        precisions_.push_back(std::move(f.precision));
        log_dets_.push_back(f.log_det);
    } else {
        for (std::size_t c = 0; c < k; ++c) {
            const double dof = counts[c] - 1.0;
            auto f = factor_covariance(scatter[c] / (dof > 0.0 ? dof : 1.0));
            regularized_ = regularized_ || f.regularized;
            precisions_.push_back(std::move(f.precision));
            log_dets_.push_back(f.log_det);
        }
    }
}

Eigen::MatrixXd DiscriminantClassifier::scores(const Eigen::MatrixXd& X) const {
    if (classes_.empty())
        throw ContractError("discriminant: not fitted");
    if (X.cols() != means_.front().size())
        throw ContractError("discriminant: column count mismatch");
    const std::size_t k = classes_.size();
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c) {
        const auto& P = precisions_[quadratic_ ? c : 0];
        const Eigen::MatrixXd centered = X.rowwise() - means_[c].transpose();
        const Eigen::VectorXd maha = ((centered * P).array() * centered.array()).rowwise().sum();
        const double log_det = quadratic_ ? log_dets_[c] : 0.0;
        out.col(Eigen::Index(c)) = (-0.5 * maha.array() - 0.5 * log_det + log_priors_[c]).matrix();
    }
    return out;
}

Eigen::VectorXd DiscriminantClassifier::predict(const Eigen::MatrixXd& X) const {
    const auto s = scores(X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index best = 0;
        s.row(i).maxCoeff(&best);
        out(i) = classes_[static_cast<std::size_t>(best)];
    }
    return out;
}

nlohmann::json DiscriminantClassifier::save() const {
    nlohmann::json means = nlohmann::json::array(), precisions = nlohmann::json::array();
    for (const auto& m : means_)
        means.push_back(to_json(m));
    for (const auto& p : precisions_)
        precisions.push_back(to_json(p));
    return {{"classes", classes_}, {"means", means},         {"precisions", precisions},
            {"log_dets", log_dets_}, {"log_priors", log_priors_}, {"regularized", regularized_}};
}

void DiscriminantClassifier::load(const nlohmann::json& state) {
    classes_ = state.at("classes").get<std::vector<double>>();
    means_.clear();
    precisions_.clear();
    for (const auto& m : state.at("means"))
        means_.push_back(vector_from_json(m));
    for (const auto& p : state.at("precisions"))
        precisions_.push_back(matrix_from_json(p));
    log_dets_ = state.at("log_dets").get<std::vector<double>>();
    log_priors_ = state.at("log_priors").get<std::vector<double>>();
    regularized_ = state.at("regularized").get<bool>();
}

} // namespace bleocc
