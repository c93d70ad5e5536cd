#pragma once

// Concrete estimators behind `make_estimator`. Exposed for tests that need
// family-specific state (coefficients, loss curves, solver diagnostics).

#include "bleocc/models.hpp"
#include "bleocc/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace bleocc {

// Reads typed values out of a Params map.
class ParamReader {
public:
    explicit ParamReader(const Params& p) : p_(p) {}
    double number(const std::string& key, double fallback) const;
    std::string text(const std::string& key, const std::string& fallback) const;
    // "unlimited" (or 0) maps to 0.
    int depth(const std::string& key, int fallback) const;

private:
    const Params& p_;
};

// Sorted distinct labels and the code (index) of every label.
struct ClassIndex {
    std::vector<double> classes;
    std::vector<int> codes;
};
ClassIndex index_classes(const Eigen::VectorXd& y, std::size_t min_classes);

class KnnClassifier final : public Estimator {
public:
    KnnClassifier(int k, bool weighted) : k_(k), weighted_(weighted) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    static constexpr double kWeightEpsilon = 1e-9;

private:
    int k_;
    bool weighted_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
};

// Gaussian discriminants: one pooled covariance (linear) or one per class (quadratic).
class DiscriminantClassifier final : public Estimator {
public:
    explicit DiscriminantClassifier(bool quadratic) : quadratic_(quadratic) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    // Per-class discriminant scores, one column per class.
    Eigen::MatrixXd scores(const Eigen::MatrixXd& X) const;
    bool regularized() const noexcept { return regularized_; }

private:
    bool quadratic_;
    bool regularized_ = false;
    std::vector<double> classes_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> precisions_; // one (pooled) or one per class
    std::vector<double> log_dets_;
    std::vector<double> log_priors_;
};

enum class SvmKernel { Linear, Polynomial, Sigmoid, Rbf };
enum class SvmPenalty { L1, L2 };
enum class SvmLoss { Hinge, SquaredHinge };

struct SvmOptions {
    SvmKernel kernel = SvmKernel::Linear;
    SvmPenalty penalty = SvmPenalty::L2;
    SvmLoss loss = SvmLoss::SquaredHinge;
    double C = 1.0;
    double gamma = 0.0; // 0 = 1 / (n_features * variance of X)
    int degree = 3;
    double coef0 = 1.0;
    double tol = 1e-4;
    int max_iter = 10000; // epochs
    std::uint64_t seed = 0;
};

SvmOptions svm_options(const Params& params, std::uint64_t seed);

// One-vs-rest support vector machine. L2 penalty: dual coordinate descent
// on the (kernel) dual with the bias folded into the kernel. L1 penalty:
// primal coordinate descent with the squared hinge loss over the input
// columns (linear kernel) or the empirical kernel map (other kernels).
class SvmClassifier final : public Estimator {
public:
    explicit SvmClassifier(SvmOptions options) : opt_(options) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    // Decision values, one column per binary machine.
    Eigen::MatrixXd decision(const Eigen::MatrixXd& X) const;
    // Final optimality violation per machine and whether it dropped below tol.
    // L2: projected gradient spread. L1: largest minimum-norm subgradient
    // relative to its value at the start (at least 1).
    const std::vector<double>& final_violation() const noexcept { return violation_; }
    bool converged() const noexcept { return converged_; }

    struct Machine {
        Eigen::VectorXd weights; // linear kernel: w
        Eigen::MatrixXd basis;   // other kernels: expansion rows
        Eigen::VectorXd coef;    // other kernels: expansion coefficients
        double bias = 0.0;
    };

private:
    double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
    Machine train_dual(const Eigen::MatrixXd& X, const Eigen::VectorXd& s, std::uint64_t seed, double& viol) const;
    Machine train_l1(const Eigen::MatrixXd& X, const Eigen::VectorXd& s, std::uint64_t seed, double& viol) const;

    SvmOptions opt_;
    double gamma_ = 0.0;
    std::vector<double> classes_;
    std::vector<Machine> machines_;
    std::vector<double> violation_;
    bool converged_ = false;
};

// Linear regressors share an intercept + coefficient representation.
class LinearRegressorBase : public Estimator {
public:
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    const Eigen::VectorXd& coef() const noexcept { return coef_; }
    double intercept() const noexcept { return intercept_; }

protected:
    Eigen::VectorXd coef_;
    double intercept_ = 0.0;
};

// Minimum-norm least squares with an intercept.
class OlsRegressor final : public LinearRegressorBase {
public:
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
};

class RidgeRegressor final : public LinearRegressorBase {
public:
    explicit RidgeRegressor(double lambda) : lambda_(lambda) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;

private:
    double lambda_;
};

class RansacRegressor final : public LinearRegressorBase {
public:
    RansacRegressor(double threshold_quantile, int max_trials, std::uint64_t seed)
        : quantile_(threshold_quantile), max_trials_(max_trials), seed_(seed) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;

    const std::vector<std::size_t>& inliers() const noexcept { return inliers_; }
    double threshold() const noexcept { return threshold_; }

private:
    double quantile_;
    int max_trials_;
    std::uint64_t seed_;
    double threshold_ = 0.0;
    std::vector<std::size_t> inliers_;
};

// Bayesian ridge: noise precision alpha and weight precision lambda updated
// by evidence maximisation until the coefficients settle.
class BayesianRidgeRegressor final : public LinearRegressorBase {
public:
    BayesianRidgeRegressor(double lambda_init, int max_iter, double tol)
        : lambda_init_(lambda_init), max_iter_(max_iter), tol_(tol) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;

    double alpha() const noexcept { return alpha_; }
    double lambda() const noexcept { return lambda_; }
    int iterations() const noexcept { return iterations_; }

private:
    double lambda_init_;
    int max_iter_;
    double tol_;
    double alpha_ = 0.0;
    double lambda_ = 0.0;
    int iterations_ = 0;
};

// Spatial median of exact least-squares fits on random (n_features + 1)-row
// subsets; enumerates every subset when there are few enough.
class TheilSenRegressor final : public LinearRegressorBase {
public:
    TheilSenRegressor(int n_subsets, std::uint64_t seed) : n_subsets_(n_subsets), seed_(seed) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;

private:
    int n_subsets_;
    std::uint64_t seed_;
};

// Weiszfeld iteration; exposed for tests.
Eigen::VectorXd spatial_median(const Eigen::MatrixXd& points, int max_iter = 300, double tol = 1e-10);

class ForestRegressor final : public Estimator {
public:
    ForestRegressor(ForestParams params, FeatureSubset subset) : params_(params), subset_(subset) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    const RandomForest& forest() const noexcept { return forest_; }

private:
    ForestParams params_;
    FeatureSubset subset_;
    RandomForest forest_;
};

// Least-squares gradient boosting with shrinkage.
class BoostingRegressor final : public Estimator {
public:
    BoostingRegressor(std::size_t n_rounds, TreeParams tree, double learning_rate, std::uint64_t seed)
        : n_rounds_(n_rounds), tree_(tree), learning_rate_(learning_rate), seed_(seed) {}
    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override;
    nlohmann::json save() const override;
    void load(const nlohmann::json& state) override;

    // Mean squared training error before round 1 and after every round.
    const std::vector<double>& training_loss() const noexcept { return loss_; }

private:
    std::size_t n_rounds_;
    TreeParams tree_;
    double learning_rate_;
    std::uint64_t seed_;
    double init_ = 0.0;
    std::vector<DecisionTree> trees_;
    std::vector<double> loss_;
};

// JSON helpers shared by the estimators.
nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);

} // namespace bleocc
