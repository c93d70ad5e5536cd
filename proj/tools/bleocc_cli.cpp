#include "bleocc/dataset.hpp"
#include "bleocc/error.hpp"
#include "bleocc/features.hpp"
#include "bleocc/keyvalue.hpp"
#include "bleocc/pipeline.hpp"
#include "bleocc/simulator.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace bleocc;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Files written by this run; removed again if the command fails.
class Outputs {
public:
    void write(const std::string& path, const std::string& content) {
        const std::string tmp = path + ".partial";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw Error("cannot open '" + path + "' for writing");
            out << content;
            out.flush();
            if (!out)
                throw Error("write to '" + path + "' failed");
        }
        fs::rename(tmp, path);
        written_.push_back(path);
    }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& p : written_) {
            fs::remove(p, ec);
            fs::remove(p + ".partial", ec);
        }
        written_.clear();
    }

private:
    std::vector<std::string> written_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& given) {
    if (given)
        return *given;
    std::random_device rd;
    const std::uint64_t seed = (std::uint64_t(rd()) << 32) ^ rd();
    std::cerr << "no --seed given; using random seed " << seed << "\n";
    return seed;
}

RssiDataset load(const std::string& csv, const std::string& meta) {
    const std::string sidecar = meta.empty() ? default_sidecar_path(csv) : meta;
    if (!fs::exists(csv))
        throw UsageError("dataset '" + csv + "' does not exist");
    if (!fs::exists(sidecar))
        throw UsageError("sidecar '" + sidecar + "' does not exist");
    return load_dataset(csv, sidecar);
}

std::vector<Family> parse_families(const std::string& list) {
    std::vector<Family> out;
    for (const auto& name : split(list, ','))
        if (!trim(name).empty())
            out.push_back(family_from_string(trim(name)));
    return out;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BLE RSSI occupancy detection and counting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(library_version()));

    // simulate
    auto* sim = app.add_subcommand("simulate", "render a scenario file into a labelled dataset");
    std::string sim_scenario, sim_out, sim_meta;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--scenario", sim_scenario, "scenario file")->required();
    sim->add_option("--out", sim_out, "output CSV")->required();
    sim->add_option("--meta", sim_meta, "output sidecar (default: <out stem>.meta)");
    sim->add_option("--seed", sim_seed, "master seed (overrides the scenario's seed)");

    // validate
    auto* val = app.add_subcommand("validate", "check a dataset against its invariants");
    std::string val_csv, val_meta;
    val->add_option("dataset", val_csv, "dataset CSV")->required();
    val->add_option("--meta", val_meta, "sidecar path");

    // featurize
    auto* feat = app.add_subcommand("featurize", "write the windowed feature matrix");
    std::string feat_csv, feat_meta, feat_out;
    double feat_window = 1.0;
    feat->add_option("dataset", feat_csv, "dataset CSV")->required();
    feat->add_option("--meta", feat_meta, "sidecar path");
    feat->add_option("--out", feat_out, "output feature CSV")->required();
    feat->add_option("--window-s", feat_window, "window length in seconds")->check(CLI::PositiveNumber);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "train, grid-search and test models");
    std::string ev_csv, ev_meta, ev_task = "detection", ev_repr = "features", ev_models, ev_out = "report.json",
                ev_scores, ev_model_out;
    std::size_t ev_k = 5, ev_jobs = 1, ev_sel_trees = 100;
    double ev_window = 1.0, ev_ratio = 0.75;
    bool ev_chrono = false, ev_no_select = false;
    std::optional<std::uint64_t> ev_seed;
    ev->add_option("dataset", ev_csv, "dataset CSV")->required();
    ev->add_option("--meta", ev_meta, "sidecar path");
    ev->add_option("--task", ev_task, "detection or counting")->check(CLI::IsMember({"detection", "counting"}));
    ev->add_option("--representation", ev_repr, "features or raw")->check(CLI::IsMember({"features", "raw"}));
    ev->add_option("--models", ev_models, "comma-separated families (default: all for the task)");
    ev->add_option("--k", ev_k, "cross-validation folds")->check(CLI::Range(2, 1000));
    ev->add_option("--seed", ev_seed, "master seed");
    ev->add_option("--jobs", ev_jobs, "worker threads for the grid search")->check(CLI::Range(1, 256));
    ev->add_option("--window-s", ev_window, "window length in seconds")->check(CLI::PositiveNumber);
    ev->add_option("--train-ratio", ev_ratio, "hold-out training fraction")->check(CLI::Range(0.01, 0.99));
    ev->add_flag("--chronological", ev_chrono, "hold out the last rows instead of a random split");
    ev->add_flag("--no-select", ev_no_select, "skip tree-based feature selection");
    ev->add_option("--selection-trees", ev_sel_trees, "trees in the selection forest")->check(CLI::Range(1, 100000));
    ev->add_option("--out", ev_out, "report JSON");
    ev->add_option("--scores", ev_scores, "per-config CSV (default: <out stem>.scores.csv)");
    ev->add_option("--model-out", ev_model_out, "save the best model (JSON) and its preprocessing sidecar");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    Outputs outputs;
    try {
        if (*sim) {
            if (!fs::exists(sim_scenario))
                throw UsageError("scenario file '" + sim_scenario + "' does not exist");
            const std::string text = read_file(sim_scenario);
            ScenarioConfig cfg = parse_scenario(text);
            if (sim_seed)
                cfg.seed = *sim_seed;
            else if (!KeyValueDoc::parse(text).find("seed"))
                cfg.seed = resolve_seed(std::nullopt);
            const RssiDataset d = simulate(cfg);
            const std::string meta = sim_meta.empty() ? default_sidecar_path(sim_out) : sim_meta;
            outputs.write(sim_out, serialize_dataset(d));
            outputs.write(meta, serialize_sidecar(d));
            std::cout << d.records.size() << " records written to " << sim_out << " (seed " << cfg.seed << ")\n";
        } else if (*val) {
            const RssiDataset d = load(val_csv, val_meta);
            const auto report = validate(d);
            std::cout << d.records.size() << " records, " << d.transmitters.size() << " transmitters, "
                      << d.sampling_hz << " Hz\n";
            for (const auto& f : report.findings)
                std::cout << to_string(f.kind) << " at record " << f.index << ": " << f.message << "\n";
            std::cout << (report.ok() ? "valid\n" : std::to_string(report.findings.size()) + " finding(s)\n");
            return report.ok() ? 0 : kExitFailure;
        } else if (*feat) {
            const RssiDataset d = load(feat_csv, feat_meta);
            const FeatureMatrix m = build_feature_matrix(segment(d, feat_window));
            outputs.write(feat_out, m.to_csv());
            std::cout << m.rows() << " windows x " << m.cols() << " features written to " << feat_out << "\n";
            if (m.nonfinite_replaced > 0)
                std::cerr << m.nonfinite_replaced << " non-finite values replaced by 0\n";
        } else if (*ev) {
            PipelineConfig cfg;
            cfg.task = task_from_string(ev_task);
            cfg.representation = representation_from_string(ev_repr);
            if (cfg.task == Task::Classification && cfg.representation == Representation::Raw)
                throw UsageError("detection needs --representation features; raw rows are only supported for counting");
            try {
                cfg.families = parse_families(ev_models);
            } catch (const std::exception& e) {
                throw UsageError(e.what());
            }
            for (auto f : cfg.families)
                if (task_of(f) != cfg.task)
                    throw UsageError(std::string(to_string(f)) + " cannot be used for " + ev_task);
            cfg.k = ev_k;
            cfg.jobs = ev_jobs;
            cfg.window_s = ev_window;
            cfg.train_ratio = ev_ratio;
            cfg.split = ev_chrono ? SplitMode::Chronological : SplitMode::Shuffled;
            cfg.select_features = !ev_no_select;
            cfg.selection_trees = ev_sel_trees;
            cfg.seed = resolve_seed(ev_seed);

            const RssiDataset d = load(ev_csv, ev_meta);
            const auto result = run_pipeline(d, cfg);
            const auto& rep = result.report;

            auto doc = to_json(rep);
            doc["run_config"]["dataset"] = ev_csv;
            doc["run_config"]["jobs"] = ev_jobs;
            const std::string scores = ev_scores.empty() ? fs::path(ev_out).replace_extension(".scores.csv").string()
                                                         : ev_scores;
            outputs.write(ev_out, doc.dump(2) + "\n");
            outputs.write(scores, scores_csv(rep));
            if (!ev_model_out.empty() && result.best_model) {
                outputs.write(ev_model_out, result.best_model->to_json().dump() + "\n");
                outputs.write(ev_model_out + ".preprocess",
                              serialize_preprocess(result.scaler, result.selection ? &*result.selection : nullptr));
            }

            std::cout << task_label(rep.task) << " / " << rep.representation << ": " << rep.fingerprint.rows
                      << " rows (" << rep.fingerprint.train_rows << " train, " << rep.fingerprint.test_rows
                      << " test), " << rep.fingerprint.selected_columns << " of " << rep.fingerprint.columns
                      << " columns used\n";
            for (std::size_t i = 0; i < rep.families.size(); ++i) {
                const auto& o = rep.families[i];
                std::cout << (int(i) == rep.best_family ? "* " : "  ") << to_string(o.grid.family) << ": ";
                if (o.failed) {
                    std::cout << "failed (" << o.error << ")\n";
                    continue;
                }
                const auto& best = o.grid.configs[o.grid.best];
                std::cout << "best " << params_to_string(best.params) << ", cv " << fmt(best.mean) << " +- "
                          << fmt(best.sd) << ", test ";
                if (rep.task == Task::Classification)
                    std::cout << "A=" << fmt(o.classification.accuracy) << " P=" << fmt(o.classification.precision)
                              << " R=" << fmt(o.classification.recall) << " S=" << fmt(o.classification.specificity)
                              << "\n";
                else
                    std::cout << "RMSE=" << fmt(o.regression.rmse) << " MAE=" << fmt(o.regression.mae) << "\n";
            }
            std::cout << "best family: " << to_string(rep.families[std::size_t(rep.best_family)].grid.family) << "\n";
            for (const auto& n : rep.notes)
                std::cout << "note: " << n << "\n";
            std::cout << "report written to " << ev_out << "\n";
        }
    } catch (const UsageError& e) {
        outputs.rollback();
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const StageError& e) {
        outputs.rollback();
        std::cerr << "error in stage '" << e.stage() << "': " << e.what() << "\n";
        return kExitFailure;
    } catch (const ParseError& e) {
        outputs.rollback();
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        outputs.rollback();
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
