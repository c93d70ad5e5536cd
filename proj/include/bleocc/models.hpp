#pragma once

#include "json.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

enum class Task { Classification, Regression };

enum class Family {
    // classifiers
    KNN,
    WKNN,
    LDA,
    QLDA,
    SVM,
    // regressors
    GradientBoosting,
    RandomForest,
    Linear,
    Ridge,
    RANSAC,
    Bayesian,
    TheilSen,
};

std::string_view to_string(Family family);
std::string_view to_string(Task task);
// Case-insensitive; accepts short aliases such as "rf", "gb", "ols".
Family family_from_string(std::string_view name);
Task task_of(Family family);
const std::vector<Family>& classifier_families();
const std::vector<Family>& regressor_families();

// Hyperparameters by name. Values are kept as text ("0.1", "rbf",
// "unlimited") so that every family shares one representation.
using Params = std::map<std::string, std::string>;

struct ModelSpec {
    Family family = Family::KNN;
    Params params;
    std::uint64_t seed = 0;
};

// Parameter names a family understands.
const std::vector<std::string>& grid_dimensions(Family family);
// Throws ContractError on an unknown parameter name or an unparsable value.
void validate_spec(const ModelSpec& spec);
std::string params_to_string(const Params& params);

// Hyperparameter grid in a fixed order. SVM combinations of an L1 penalty
// with the plain hinge loss are dropped (no solver for that pair), so the
// SVM grid has 36 of its 48 cartesian points.
std::vector<Params> default_grid(Family family);
std::size_t cartesian_grid_size(Family family);

// Implementation side of one family.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) = 0;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
    virtual nlohmann::json save() const = 0;
    virtual void load(const nlohmann::json& state) = 0;
};

std::unique_ptr<Estimator> make_estimator(const ModelSpec& spec);

struct Prediction {
    Eigen::VectorXd values; // class labels, or unrounded occupant counts
    std::vector<int> counts; // regression: rounded half away from zero, clamped at 0
};

// A fitted model; immutable and safe to share once constructed.
class TrainedModel {
public:
    TrainedModel(ModelSpec spec, std::size_t n_features, std::shared_ptr<const Estimator> estimator);

    const ModelSpec& spec() const noexcept { return spec_; }
    Task task() const noexcept { return task_of(spec_.family); }
    std::size_t n_features() const noexcept { return n_features_; }
    const Estimator& estimator() const noexcept { return *estimator_; }

    Prediction predict(const Eigen::MatrixXd& X) const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& doc);

private:
    ModelSpec spec_;
    std::size_t n_features_;
    std::shared_ptr<const Estimator> estimator_;
};

TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& X);

int round_count(double value);

} // namespace bleocc
