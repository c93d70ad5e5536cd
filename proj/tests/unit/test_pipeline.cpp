#include "doctest.h"
#include "helpers.hpp"

#include "bleocc/error.hpp"
#include "bleocc/features.hpp"
#include "bleocc/pipeline.hpp"
#include "bleocc/rng.hpp"

#include <algorithm>

using namespace bleocc;

namespace {

PipelineConfig quick(Task task, Representation rep, std::vector<Family> families) {
    PipelineConfig c;
    c.task = task;
    c.representation = rep;
    c.families = std::move(families);
    c.k = 3;
    c.seed = 11;
    c.selection_trees = 20;
    return c;
}

} // namespace

TEST_CASE("names") {
    CHECK(task_from_string("detection") == Task::Classification);
    CHECK(task_from_string("counting") == Task::Regression);
    CHECK(representation_from_string("raw") == Representation::Raw);
    CHECK(to_string(Representation::Features) == "features");
    CHECK(task_label(Task::Regression) == "counting");
    CHECK_THROWS_AS(task_from_string("tracking"), ContractError);
    CHECK_THROWS_AS(representation_from_string("wavelet"), ContractError);
    CHECK_FALSE(library_version().empty());
}

TEST_CASE("detection on raw samples is refused") {
    const auto d = simulate(testutil::small_scenario(20, 20));
    CHECK_THROWS_AS(run_pipeline(d, quick(Task::Classification, Representation::Raw, {})), ContractError);
    CHECK_THROWS_AS(run_pipeline(d, quick(Task::Classification, Representation::Features, {Family::Ridge})),
                    ContractError);
}

TEST_CASE("failures name their stage") {
    auto d = simulate(testutil::small_scenario(20, 20));
    d.records[3].rssi.pop_back();
    try {
        run_pipeline(d, quick(Task::Regression, Representation::Features, {Family::Ridge}));
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "validate");
        CHECK(std::string(e.what()).find("validate") == 0);
    }

    // a 2 s recording yields two windows, too few to split
    const auto tiny = simulate(testutil::small_scenario(20, 2));
    try {
        run_pipeline(tiny, quick(Task::Regression, Representation::Features, {Family::Ridge}));
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "split");
    }
}

TEST_CASE("detection on features") {
    const auto d = simulate(testutil::small_scenario(20, 60));
    const auto r = run_pipeline(d, quick(Task::Classification, Representation::Features, {Family::KNN, Family::LDA}));
    const auto& rep = r.report;
    CHECK(rep.families.size() == 2);
    CHECK(rep.best_family >= 0);
    CHECK(rep.fingerprint.rows == 60);
    CHECK(rep.fingerprint.columns == 3 * kFeaturesPerTransmitter);
    CHECK(rep.fingerprint.train_rows == 45);
    CHECK(rep.fingerprint.test_rows == 15);
    CHECK(rep.fingerprint.class_balance.at(0) + rep.fingerprint.class_balance.at(1) == 60);
    CHECK(r.selection.has_value());
    CHECK(rep.fingerprint.selected_columns == r.selection->kept.size());
    CHECK(r.input_columns.size() == rep.fingerprint.columns);
    REQUIRE(r.best_model.has_value());
    CHECK(r.best_model->spec().family == rep.families[std::size_t(rep.best_family)].grid.family);
    // three quarters of the windows are occupied; every family must beat that baseline
    for (const auto& f : rep.families) {
        CHECK_FALSE(f.failed);
        CHECK(f.classification.accuracy > 0.75);
    }
    CHECK(rep.families[std::size_t(rep.best_family)].classification.accuracy > 0.9);
    const auto& notes = rep.notes;
    CHECK(std::any_of(notes.begin(), notes.end(), [](const std::string& n) { return n.find("1000 ms window") != n.npos; }));
    CHECK(std::any_of(notes.begin(), notes.end(), [](const std::string& n) { return n.find("chronological") != n.npos; }));
}

TEST_CASE("the best family is chosen by cross-validation") {
    const auto d = simulate(testutil::small_scenario(20, 60, 3));
    const auto r = run_pipeline(d, quick(Task::Regression, Representation::Features,
                                         {Family::Linear, Family::Ridge, Family::RandomForest}));
    const auto& fams = r.report.families;
    const auto& best = fams[std::size_t(r.report.best_family)];
    for (const auto& f : fams)
        CHECK(f.grid.configs[f.grid.best].mean <= best.grid.configs[best.grid.best].mean);
}

TEST_CASE("scaler and selector only see training rows") {
    const auto d = simulate(testutil::small_scenario(20, 60, 5));
    auto cfg = quick(Task::Regression, Representation::Features, {Family::Ridge});
    const auto r = run_pipeline(d, cfg);

    const auto m = deduplicate_rows(build_feature_matrix(segment(d)));
    const Eigen::VectorXd y = m.count_targets();
    const auto split = holdout_split({y.data(), std::size_t(y.size())}, Task::Regression, sub_seed(cfg.seed, "split"));
    const auto train = m.select_rows(split.train);
    const auto scaler = fit_scaler(train);
    CHECK(scaler.q1 == r.scaler.q1);
    CHECK(scaler.q2 == r.scaler.q2);
    CHECK(scaler.q3 == r.scaler.q3);
    CHECK(fit_scaler(m).q2 != r.scaler.q2);

    std::vector<std::size_t> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
    CHECK(all.size() == m.rows());
}

TEST_CASE("counting on raw samples") {
    const auto d = simulate(testutil::small_scenario(10, 30));
    const auto r = run_pipeline(d, quick(Task::Regression, Representation::Raw, {Family::Ridge, Family::Linear}));
    const auto& rep = r.report;
    CHECK_FALSE(r.selection.has_value());
    CHECK(rep.fingerprint.columns == 3);
    CHECK(rep.fingerprint.rows + rep.fingerprint.duplicate_rows == 300);
    const auto& notes = rep.notes;
    CHECK(std::any_of(notes.begin(), notes.end(),
                      [](const std::string& n) { return n.find("every 100 ms at 10 Hz") != n.npos; }));
    CHECK(std::any_of(notes.begin(), notes.end(), [](const std::string& n) { return n.find("unrounded") != n.npos; }));
    for (const auto& f : rep.families)
        CHECK(f.regression.rmse >= f.regression.mae);
}

TEST_CASE("reports are reproducible byte for byte") {
    const auto d = simulate(testutil::small_scenario(20, 40));
    auto cfg = quick(Task::Regression, Representation::Features, {Family::RandomForest, Family::TheilSen});
    cfg.grids[Family::RandomForest] = {{{"n_trees", "20"}, {"depth", "4"}}};
    const auto a = run_pipeline(d, cfg);
    cfg.jobs = 3;
    const auto b = run_pipeline(d, cfg);
    auto ja = to_json(a.report), jb = to_json(b.report);
    ja["run_config"].erase("jobs");
    jb["run_config"].erase("jobs");
    CHECK(ja.dump() == jb.dump());
    CHECK(scores_csv(a.report) == scores_csv(b.report));
    CHECK(a.best_model->to_json().dump() == b.best_model->to_json().dump());

    cfg.seed = 12;
    const auto c = run_pipeline(d, cfg);
    CHECK(to_json(c.report)["derived_seeds"] != ja["derived_seeds"]);
}

TEST_CASE("report layout") {
    const auto d = simulate(testutil::small_scenario(20, 40));
    auto cfg = quick(Task::Classification, Representation::Features, {Family::KNN});
    cfg.grids[Family::KNN] = {{{"k", "1"}}, {{"k", "bogus"}}};
    const auto r = run_pipeline(d, cfg);
    const auto j = to_json(r.report);
    CHECK(j.at("format") == "bleocc-report");
    CHECK(j.at("task") == "detection");
    CHECK(j.at("dataset").at("content_hash").get<std::string>().size() == 16);
    CHECK(j.at("families").size() == 1);
    CHECK(j.at("best_family") == std::string(to_string(Family::KNN)));

    const auto csv = scores_csv(r.report);
    CHECK(csv.rfind("family,config_index,params,mean,sd,folds_ok,folds_failed,excluded,best\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\"k=bogus\"") != csv.npos);
}
