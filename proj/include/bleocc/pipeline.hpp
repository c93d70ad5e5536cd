#pragma once

#include "bleocc/dataset.hpp"
#include "bleocc/evaluation.hpp"
#include "bleocc/models.hpp"
#include "bleocc/preprocess.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bleocc {

enum class Representation { Raw, Features };

std::string_view to_string(Representation r);
Representation representation_from_string(std::string_view name);
// "detection" -> Classification, "counting" -> Regression.
Task task_from_string(std::string_view name);
std::string_view task_label(Task task);

struct PipelineConfig {
    Task task = Task::Classification;
    Representation representation = Representation::Features;
    std::vector<Family> families; // empty: every family of the task
    std::map<Family, std::vector<Params>> grids; // overrides default_grid per family
    double window_s = 1.0;
    std::size_t k = 5;
    double train_ratio = 0.75;
    SplitMode split = SplitMode::Shuffled;
    bool select_features = true;
    std::size_t selection_trees = 100;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

nlohmann::json to_json(const PipelineConfig& config);

struct PipelineResult {
    EvalReport report;
    ScalerParams scaler;
    std::optional<SelectionMask> selection;
    std::vector<std::string> input_columns; // column names before selection
    std::optional<TrainedModel> best_model; // refit of the winning config on the full training split
};

std::string_view library_version();

// segmentation/featurization (or raw rows) -> duplicate row removal -> split ->
// scaler and selector fitted on the training rows -> per-family grid search ->
// test evaluation of each family's best config. Failures carry the stage name.
PipelineResult run_pipeline(const RssiDataset& dataset, const PipelineConfig& config);

} // namespace bleocc
