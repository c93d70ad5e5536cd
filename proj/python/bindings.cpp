#include "bleocc/dataset.hpp"
#include "bleocc/error.hpp"
#include "bleocc/evaluation.hpp"
#include "bleocc/features.hpp"
#include "bleocc/models.hpp"
#include "bleocc/pipeline.hpp"
#include "bleocc/preprocess.hpp"
#include "bleocc/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bleocc;

namespace {

Eigen::MatrixXi rssi_matrix(const RssiDataset& d) {
    Eigen::MatrixXi m(Eigen::Index(d.records.size()), Eigen::Index(d.transmitters.size()));
    for (std::size_t i = 0; i < d.records.size(); ++i)
        for (std::size_t t = 0; t < d.transmitters.size(); ++t)
            m(Eigen::Index(i), Eigen::Index(t)) = d.records[i].rssi[t];
    return m;
}

py::dict matrix_dict(const FeatureMatrix& m) {
    py::dict out;
    out["names"] = m.feature_names;
    out["values"] = m.values;
    out["occupancy"] = m.labels_occupancy;
    out["count"] = m.labels_count;
    return out;
}

} // namespace

PYBIND11_MODULE(_bleocc, m) {
    m.doc() = "BLE RSSI occupancy detection and counting";
    m.def("version", [] { return std::string(library_version()); });

    py::register_exception<Error>(m, "Error");

    py::class_<RssiDataset>(m, "Dataset")
        .def_property_readonly("sampling_hz", [](const RssiDataset& d) { return d.sampling_hz; })
        .def_property_readonly("transmitters",
                               [](const RssiDataset& d) {
                                   std::vector<std::pair<std::string, int>> out;
                                   for (const auto& t : d.transmitters)
                                       out.emplace_back(t.id, t.distance_cm);
                                   return out;
                               })
        .def_property_readonly("timestamps_ms",
                               [](const RssiDataset& d) {
                                   std::vector<std::int64_t> out;
                                   for (const auto& r : d.records)
                                       out.push_back(r.timestamp_ms);
                                   return out;
                               })
        .def_property_readonly("rssi", &rssi_matrix)
        .def_property_readonly("occupancy",
                               [](const RssiDataset& d) {
                                   std::vector<bool> out;
                                   for (const auto& r : d.records)
                                       out.push_back(r.occupancy);
                                   return out;
                               })
        .def_property_readonly("count",
                               [](const RssiDataset& d) {
                                   std::vector<int> out;
                                   for (const auto& r : d.records)
                                       out.push_back(r.count);
                                   return out;
                               })
        .def("__len__", [](const RssiDataset& d) { return d.records.size(); })
        .def("to_csv", &serialize_dataset)
        .def("sidecar", &serialize_sidecar)
        .def("save", &save_dataset, py::arg("csv_path"), py::arg("sidecar_path"))
        .def("validate", [](const RssiDataset& d) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& f : validate(d).findings)
                out.emplace_back(std::string(to_string(f.kind)), f.message);
            return out;
        });

    m.def(
        "simulate",
        [](const std::string& scenario, std::optional<std::uint64_t> seed) {
            auto cfg = parse_scenario(scenario);
            if (seed)
                cfg.seed = *seed;
            return simulate(cfg);
        },
        py::arg("scenario"), py::arg("seed") = py::none());
    m.def("load_dataset", &load_dataset, py::arg("csv_path"), py::arg("sidecar_path"));
    m.def(
        "parse_dataset",
        [](const std::string& csv, const std::string& sidecar) { return parse_dataset(csv, parse_sidecar(sidecar)); },
        py::arg("csv"), py::arg("sidecar"));

    m.def(
        "featurize",
        [](const RssiDataset& d, double window_s) { return matrix_dict(build_feature_matrix(segment(d, window_s))); },
        py::arg("dataset"), py::arg("window_s") = 1.0);
    m.def("raw_matrix", [](const RssiDataset& d) { return matrix_dict(build_raw_matrix(d)); });
    m.def(
        "time_features",
        [](const std::vector<double>& x, const std::vector<std::int64_t>& t) { return time_features(x, t); },
        py::arg("x"), py::arg("times_ms") = std::vector<std::int64_t>{});
    m.def(
        "freq_features", [](const std::vector<double>& x, double fs) { return freq_features(x, fs).values; },
        py::arg("x"), py::arg("sampling_hz"));
    m.def("time_feature_names", [] {
        const auto& n = time_feature_names();
        return std::vector<std::string>(n.begin(), n.end());
    });
    m.def("freq_feature_names", [] {
        const auto& n = freq_feature_names();
        return std::vector<std::string>(n.begin(), n.end());
    });

    m.def("fit_scaler", [](const Eigen::MatrixXd& X) {
        const auto p = fit_scaler(X);
        return py::make_tuple(p.q1, p.q2, p.q3);
    });
    m.def("robust_scale", [](const Eigen::MatrixXd& train, const Eigen::MatrixXd& X) {
        return apply_scaler(X, fit_scaler(train));
    });

    m.def("classification_metrics", [](const std::vector<double>& pred, const std::vector<double>& truth) {
        const auto r = classification_metrics(pred, truth);
        py::dict out;
        out["precision"] = r.precision;
        out["specificity"] = r.specificity;
        out["recall"] = r.recall;
        out["accuracy"] = r.accuracy;
        out["tp"] = r.counts.tp;
        out["fp"] = r.counts.fp;
        out["tn"] = r.counts.tn;
        out["fn"] = r.counts.fn;
        out["degenerate"] = r.degenerate;
        return out;
    });
    m.def("regression_metrics", [](const std::vector<double>& pred, const std::vector<double>& truth) {
        const auto r = regression_metrics(pred, truth);
        return py::make_tuple(r.rmse, r.mae);
    });

    m.def("default_grid", [](const std::string& family) { return default_grid(family_from_string(family)); });
    m.def(
        "fit_predict",
        [](const std::string& family, const Params& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
           const Eigen::MatrixXd& X_new, std::uint64_t seed) {
            const auto model = fit(ModelSpec{family_from_string(family), params, seed}, X, y);
            return Eigen::VectorXd(model.predict(X_new).values);
        },
        py::arg("family"), py::arg("params"), py::arg("X"), py::arg("y"), py::arg("X_new"), py::arg("seed") = 0);

    m.def(
        "evaluate",
        [](const RssiDataset& d, const std::string& task, const std::string& representation,
           const std::vector<std::string>& models, std::size_t k, std::uint64_t seed, std::size_t jobs,
           bool select) {
            PipelineConfig cfg;
            cfg.task = task_from_string(task);
            cfg.representation = representation_from_string(representation);
            for (const auto& f : models)
                cfg.families.push_back(family_from_string(f));
            cfg.k = k;
            cfg.seed = seed;
            cfg.jobs = jobs;
            cfg.select_features = select;
            py::gil_scoped_release release;
            return to_json(run_pipeline(d, cfg).report).dump();
        },
        py::arg("dataset"), py::arg("task"), py::arg("representation") = "features",
        py::arg("models") = std::vector<std::string>{}, py::arg("k") = 5, py::arg("seed") = 0, py::arg("jobs") = 1,
        py::arg("select") = true);
}
