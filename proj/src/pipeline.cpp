#include "bleocc/pipeline.hpp"

#include "bleocc/error.hpp"
#include "bleocc/features.hpp"
#include "bleocc/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace bleocc {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::string content_hash(const RssiDataset& d) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::int64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= static_cast<std::uint64_t>(v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& t : d.transmitters) {
        for (char c : t.id)
            mix(c);
        mix(t.distance_cm);
    }
    for (const auto& r : d.records) {
        mix(r.timestamp_ms);
        for (int v : r.rssi)
            mix(v);
        mix(r.occupancy);
        mix(r.count);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_ms(double ms) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", ms);
    return buf;
}

} // namespace

std::string_view library_version() { return BLEOCC_VERSION; }

std::string_view to_string(Representation r) { return r == Representation::Raw ? "raw" : "features"; }

Representation representation_from_string(std::string_view name) {
    const auto n = lower(name);
    if (n == "raw")
        return Representation::Raw;
    if (n == "features" || n == "feature")
        return Representation::Features;
    throw ContractError("unknown representation '" + std::string(name) + "' (expected raw or features)");
}

Task task_from_string(std::string_view name) {
    const auto n = lower(name);
    if (n == "detection" || n == "classification")
        return Task::Classification;
    if (n == "counting" || n == "regression")
        return Task::Regression;
    throw ContractError("unknown task '" + std::string(name) + "' (expected detection or counting)");
}

std::string_view task_label(Task task) { return task == Task::Classification ? "detection" : "counting"; }

nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json fams = nlohmann::json::array();
    for (auto f : c.families)
        fams.push_back(to_string(f));
    nlohmann::json grids = nlohmann::json::object();
    for (const auto& [f, g] : c.grids)
        grids[std::string(to_string(f))] = g;
    return {{"task", task_label(c.task)},
            {"representation", to_string(c.representation)},
            {"families", fams},
            {"grids", grids},
            {"window_s", c.window_s},
            {"k", c.k},
            {"train_ratio", c.train_ratio},
            {"split", c.split == SplitMode::Chronological ? "chronological" : "shuffled"},
            {"select_features", c.select_features},
            {"selection_trees", c.selection_trees},
            {"seed", c.seed}};
}

PipelineResult run_pipeline(const RssiDataset& dataset, const PipelineConfig& config) {
    if (config.task == Task::Classification && config.representation == Representation::Raw)
        throw ContractError("detection requires the features representation; raw per-sample rows are only "
                            "supported for counting");
    if (config.k < 2)
        throw ContractError("k must be at least 2");

    std::vector<Family> families = config.families;
    if (families.empty())
        families = config.task == Task::Classification ? classifier_families() : regressor_families();
    for (auto f : families)
        if (task_of(f) != config.task)
            throw ContractError(std::string(to_string(f)) + " is not a " +
                                std::string(config.task == Task::Classification ? "classifier" : "regressor"));

    PipelineResult out;
    EvalReport& rep = out.report;
    rep.task = config.task;
    rep.representation = std::string(to_string(config.representation));
    rep.run_config = to_json(config);
    rep.version = std::string(library_version());
    rep.seed = config.seed;
    const std::uint64_t split_seed = sub_seed(config.seed, "split");
    const std::uint64_t fold_seed = sub_seed(config.seed, "folds");
    const std::uint64_t select_seed = sub_seed(config.seed, "select");
    rep.derived_seeds = {{"split", split_seed}, {"folds", fold_seed}, {"select", select_seed},
                         {"model", sub_seed(fold_seed, "model")}};

    auto& fp = rep.fingerprint;
    fp.records = dataset.records.size();
    fp.transmitters = dataset.transmitters.size();
    fp.sampling_hz = dataset.sampling_hz;

    stage("validate", [&] {
        const auto v = validate(dataset);
        if (!v.ok())
            throw Error(std::to_string(v.findings.size()) + " finding(s), first: " + v.findings.front().message);
        fp.content_hash = content_hash(dataset);
        return 0;
    });

    // Duplicate removal acts on the rows the models see: raw records, or windows.
    FeatureMatrix full = stage("featurize", [&] {
        if (config.representation == Representation::Raw)
            return build_raw_matrix(dataset);
        return build_feature_matrix(segment(dataset, config.window_s));
    });
    FeatureMatrix m = stage("dedup", [&] { return deduplicate_rows(full); });
    fp.rows = m.rows();
    fp.duplicate_rows = full.rows() - m.rows();
    fp.columns = m.cols();
    out.input_columns = m.feature_names;
    if (m.nonfinite_replaced > 0)
        rep.notes.push_back(std::to_string(m.nonfinite_replaced) + " non-finite feature values replaced by 0");

    const Eigen::VectorXd y = config.task == Task::Classification ? m.occupancy_targets() : m.count_targets();
    const auto& labels = config.task == Task::Classification ? m.labels_occupancy : m.labels_count;
    for (int l : labels)
        ++fp.class_balance[l];

    const Split split = stage("split", [&] {
        return holdout_split(std::span<const double>(y.data(), std::size_t(y.size())), config.task, split_seed,
                             config.train_ratio, config.split);
    });
    fp.train_rows = split.train.size();
    fp.test_rows = split.test.size();

    FeatureMatrix train = m.select_rows(split.train);
    FeatureMatrix test = m.select_rows(split.test);
    const Eigen::VectorXd y_train = config.task == Task::Classification ? train.occupancy_targets()
                                                                        : train.count_targets();
    const Eigen::VectorXd y_test = config.task == Task::Classification ? test.occupancy_targets()
                                                                       : test.count_targets();

    stage("scale", [&] {
        out.scaler = fit_scaler(train);
        train = apply_scaler(train, out.scaler);
        test = apply_scaler(test, out.scaler);
        return 0;
    });

    if (config.select_features && config.representation == Representation::Features) {
        stage("select", [&] {
            SelectionConfig sc;
            sc.task = config.task == Task::Classification ? SelectionTask::Classification : SelectionTask::Regression;
            sc.n_trees = config.selection_trees;
            sc.seed = select_seed;
            out.selection = select_features(train.values, y_train, sc);
            train = apply_selection(train, *out.selection);
            test = apply_selection(test, *out.selection);
            return 0;
        });
    }
    fp.selected_columns = train.cols();

    GridSearchOptions gs;
    gs.k = config.k;
    gs.seed = fold_seed;
    gs.jobs = config.jobs;
    const std::uint64_t model_seed = sub_seed(fold_seed, "model");

    std::vector<std::optional<TrainedModel>> models;
    for (auto f : families) {
        FamilyOutcome o;
        o.grid.family = f;
        o.grid.k = config.k;
        try {
            const auto it = config.grids.find(f);
            const auto grid = it != config.grids.end() ? it->second : default_grid(f);
            o.grid = stage("grid_search", [&] { return grid_search(f, grid, train.values, y_train, gs); });
            auto model = stage("test", [&] {
                return fit(ModelSpec{f, o.grid.configs[o.grid.best].params, model_seed}, train.values, y_train);
            });
            const auto pred = model.predict(test.values);
            if (config.task == Task::Classification)
                o.classification = classification_metrics(pred.values, y_test);
            else
                o.regression = regression_metrics(pred.values, y_test);
            models.emplace_back(std::move(model));
        } catch (const std::exception& e) {
            o.failed = true;
            o.error = e.what();
            models.emplace_back(std::nullopt);
        }
        rep.families.push_back(std::move(o));
    }

    for (std::size_t i = 0; i < rep.families.size(); ++i) {
        const auto& o = rep.families[i];
        if (o.failed)
            continue;
        if (rep.best_family < 0 ||
            o.grid.configs[o.grid.best].mean >
                rep.families[std::size_t(rep.best_family)].grid.configs[rep.families[std::size_t(rep.best_family)].grid.best].mean)
            rep.best_family = int(i);
    }
    if (rep.best_family < 0)
        throw StageError("grid_search", "every model family failed; first error: " + rep.families.front().error);
    out.best_model = models[std::size_t(rep.best_family)];

    if (config.split == SplitMode::Shuffled)
        rep.notes.push_back("hold-out split is random over time-ordered rows; neighbouring windows or samples "
                            "can fall on both sides, so test scores may be optimistic (use the chronological "
                            "split to avoid this)");
    if (config.representation == Representation::Raw)
        rep.notes.push_back("raw representation: one count prediction per RSSI sample, every " +
                            format_ms(1000.0 / dataset.sampling_hz) + " ms at " + format_ms(dataset.sampling_hz) +
                            " Hz");
    else
        rep.notes.push_back("features representation: one prediction per " + format_ms(config.window_s * 1000.0) +
                            " ms window");
    if (config.task == Task::Regression)
        rep.notes.push_back("regression metrics are computed on unrounded count predictions");
    return out;
}

} // namespace bleocc
