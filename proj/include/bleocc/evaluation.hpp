#pragma once

#include "bleocc/models.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bleocc {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t p() const noexcept { return tp + fn; }
    std::size_t n() const noexcept { return tn + fp; }
};

// Ratios whose denominator is zero are reported as 1 and listed in `degenerate`.
struct ClassificationMetrics {
    double precision = 0.0;
    double specificity = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    ConfusionCounts counts;
    std::vector<std::string> degenerate;
};

struct RegressionMetrics {
    double rmse = 0.0;
    double mae = 0.0;
};

// Labels must be 0 (empty) or 1 (occupied).
ClassificationMetrics classification_metrics(std::span<const double> pred, std::span<const double> truth);
RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth);

inline ClassificationMetrics classification_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return classification_metrics(std::span<const double>(pred.data(), std::size_t(pred.size())),
                                  std::span<const double>(truth.data(), std::size_t(truth.size())));
}
inline RegressionMetrics regression_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return regression_metrics(std::span<const double>(pred.data(), std::size_t(pred.size())),
                              std::span<const double>(truth.data(), std::size_t(truth.size())));
}

struct Split {
    std::vector<std::size_t> train; // ascending
    std::vector<std::size_t> test;  // ascending
};

enum class SplitMode {
    Shuffled,      // stratified by label for classification, plain shuffle for regression
    Chronological, // leading rows train, trailing rows test
};

// |train| = round(ratio * N). Classification strata are allocated by largest remainder.
Split holdout_split(std::span<const double> y, Task task, std::uint64_t seed, double ratio = 0.75,
                    SplitMode mode = SplitMode::Shuffled);

struct Fold {
    std::vector<std::size_t> fit;      // ascending
    std::vector<std::size_t> validate; // ascending
};

// Positions 0..y.size()-1. Classification deals class-grouped shuffled rows
// round-robin so every fold sees every class when possible.
std::vector<Fold> kfold_split(std::span<const double> y, Task task, std::size_t k, std::uint64_t seed);

struct ConfigScore {
    Params params;
    std::vector<double> fold_scores; // successful folds only
    std::size_t failed_folds = 0;
    double mean = 0.0;
    double sd = 0.0;
    bool excluded = false; // failed on every fold
    std::string error;     // first failure message
};

struct GridResult {
    Family family = Family::KNN;
    std::size_t k = 0;
    std::vector<ConfigScore> configs; // grid order
    std::size_t best = 0;
};

struct GridSearchOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

// Score = mean validation accuracy (classification) or negated RMSE
// (regression). The winner is the first config with the highest mean.
GridResult grid_search(Family family, const std::vector<Params>& grid, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const GridSearchOptions& options);

// Runs fn(0..count-1) over at most `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct FamilyOutcome {
    GridResult grid;
    bool failed = false;
    std::string error;
    ClassificationMetrics classification; // Task::Classification
    RegressionMetrics regression;         // Task::Regression
};

struct DatasetFingerprint {
    std::size_t records = 0;
    std::size_t transmitters = 0;
    double sampling_hz = 0.0;
    std::size_t rows = 0;          // model-input rows after duplicate removal
    std::size_t duplicate_rows = 0;
    std::size_t columns = 0;
    std::size_t selected_columns = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::map<int, std::size_t> class_balance; // label -> rows
    std::string content_hash;                 // FNV-1a over the records
};

struct EvalReport {
    Task task = Task::Classification;
    std::string representation;
    nlohmann::json run_config;
    std::string version;
    std::uint64_t seed = 0;
    std::map<std::string, std::uint64_t> derived_seeds;
    DatasetFingerprint fingerprint;
    std::vector<FamilyOutcome> families;
    int best_family = -1; // index into families, chosen by cross-validated score
    std::vector<std::string> notes;
};

nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const RegressionMetrics& m);
nlohmann::json to_json(const EvalReport& report);
// One row per (family, config): family,config_index,params,mean,sd,folds_ok,folds_failed,excluded,best
std::string scores_csv(const EvalReport& report);

} // namespace bleocc
