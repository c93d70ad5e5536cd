#include "bleocc/evaluation.hpp"

#include "bleocc/error.hpp"
#include "bleocc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace bleocc {

namespace {

double ratio_or_one(std::size_t num, std::size_t den, const char* name, std::vector<std::string>& degenerate) {
    if (den == 0) {
        degenerate.emplace_back(name);
        return 1.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

bool positive_label(double v) {
    if (v == 1.0)
        return true;
    if (v == 0.0)
        return false;
    throw ContractError("classification metrics expect labels 0 or 1, got " + std::to_string(v));
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// Class label -> positions, in ascending label order.
std::map<double, std::vector<std::size_t>> strata(std::span<const double> y) {
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < y.size(); ++i)
        groups[y[i]].push_back(i);
    return groups;
}

} // namespace

ClassificationMetrics classification_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw ContractError("classification metrics: " + std::to_string(pred.size()) + " predictions vs " +
                            std::to_string(truth.size()) + " labels");
    ClassificationMetrics m;
    auto& c = m.counts;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = positive_label(pred[i]);
        const bool t = positive_label(truth[i]);
        if (p && t)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (t)
            ++c.fn;
        else
            ++c.tn;
    }
    m.precision = ratio_or_one(c.tp, c.tp + c.fp, "precision", m.degenerate);
    m.specificity = ratio_or_one(c.tn, c.fp + c.tn, "specificity", m.degenerate);
    m.recall = ratio_or_one(c.tp, c.tp + c.fn, "recall", m.degenerate);
    m.accuracy = ratio_or_one(c.tp + c.tn, c.p() + c.n(), "accuracy", m.degenerate);
    return m;
}

RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw ContractError("regression metrics: " + std::to_string(pred.size()) + " predictions vs " +
                            std::to_string(truth.size()) + " targets");
    if (pred.empty())
        throw ContractError("regression metrics: empty input");
    double sq = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = truth[i] - pred[i];
        sq += e * e;
        ab += std::abs(e);
    }
    const auto n = static_cast<double>(pred.size());
    return {std::sqrt(sq / n), ab / n};
}

Split holdout_split(std::span<const double> y, Task task, std::uint64_t seed, double ratio, SplitMode mode) {
    const std::size_t n = y.size();
    if (n < 4)
        throw ContractError("hold-out split needs at least 4 rows, got " + std::to_string(n));
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ContractError("hold-out ratio must lie in (0, 1)");
    const auto n_train =
        static_cast<std::size_t>(std::clamp<long long>(std::llround(ratio * double(n)), 1, (long long)n - 1));

    Split s;
    if (mode == SplitMode::Chronological) {
        for (std::size_t i = 0; i < n; ++i)
            (i < n_train ? s.train : s.test).push_back(i);
        return s;
    }

    Rng rng(seed);
    if (task == Task::Regression) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        s.train = sorted({idx.begin(), idx.begin() + std::ptrdiff_t(n_train)});
        s.test = sorted({idx.begin() + std::ptrdiff_t(n_train), idx.end()});
        return s;
    }

    auto groups = strata(y);
    for (const auto& [label, rows] : groups)
        if (rows.size() < 2)
            throw ContractError("stratified split: class " + std::to_string(label) + " has fewer than 2 rows");

    // Largest-remainder allocation of the training quota across classes.
    struct Quota {
        std::size_t take;
        double remainder;
        std::size_t order;
    };
    std::vector<Quota> quotas;
    std::size_t given = 0;
    for (const auto& [label, rows] : groups) {
        const double exact = double(n_train) * double(rows.size()) / double(n);
        const auto take = static_cast<std::size_t>(std::floor(exact));
        quotas.push_back({take, exact - double(take), quotas.size()});
        given += take;
    }
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
    for (std::size_t i = 0; given < n_train; ++i, ++given)
        ++quotas[order[i % order.size()]].take;

    std::size_t g = 0;
    for (auto& [label, rows] : groups) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t take = quotas[g++].take;
        s.train.insert(s.train.end(), rows.begin(), rows.begin() + std::ptrdiff_t(take));
        s.test.insert(s.test.end(), rows.begin() + std::ptrdiff_t(take), rows.end());
    }
    s.train = sorted(std::move(s.train));
    s.test = sorted(std::move(s.test));
    return s;
}

std::vector<Fold> kfold_split(std::span<const double> y, Task task, std::size_t k, std::uint64_t seed) {
    const std::size_t n = y.size();
    if (k < 2)
        throw ContractError("k-fold needs k >= 2");
    if (k > n)
        throw ContractError("k-fold: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " rows");

    Rng rng(seed);
    std::vector<std::size_t> deal;
    deal.reserve(n);
    if (task == Task::Classification) {
        for (auto& [label, rows] : strata(y)) {
            std::shuffle(rows.begin(), rows.end(), rng);
            deal.insert(deal.end(), rows.begin(), rows.end());
        }
    } else {
        deal.resize(n);
        std::iota(deal.begin(), deal.end(), 0);
        std::shuffle(deal.begin(), deal.end(), rng);
    }

    std::vector<Fold> folds(k);
    for (std::size_t i = 0; i < n; ++i)
        folds[i % k].validate.push_back(deal[i]);
    for (auto& f : folds) {
        std::sort(f.validate.begin(), f.validate.end());
        f.fit.reserve(n - f.validate.size());
        std::size_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (v < f.validate.size() && f.validate[v] == i)
                ++v;
            else
                f.fit.push_back(i);
        }
    }
    return folds;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                fn(i);
        });
}

GridResult grid_search(Family family, const std::vector<Params>& grid, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, const GridSearchOptions& options) {
    if (grid.empty())
        throw ContractError("grid search: empty grid for " + std::string(to_string(family)));
    if (X.rows() != y.size())
        throw ContractError("grid search: target length does not match rows");
    const Task task = task_of(family);
    const auto folds =
        kfold_split(std::span<const double>(y.data(), std::size_t(y.size())), task, options.k, options.seed);

    struct FoldData {
        Eigen::MatrixXd X_fit, X_val;
        Eigen::VectorXd y_fit, y_val;
    };
    std::vector<FoldData> data(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        auto take = [&](const std::vector<std::size_t>& rows, Eigen::MatrixXd& Xo, Eigen::VectorXd& yo) {
            Xo.resize(Eigen::Index(rows.size()), X.cols());
            yo.resize(Eigen::Index(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                Xo.row(Eigen::Index(r)) = X.row(Eigen::Index(rows[r]));
                yo(Eigen::Index(r)) = y(Eigen::Index(rows[r]));
            }
        };
        take(folds[f].fit, data[f].X_fit, data[f].y_fit);
        take(folds[f].validate, data[f].X_val, data[f].y_val);
    }

    const std::size_t n_tasks = grid.size() * folds.size();
    std::vector<double> scores(n_tasks, 0.0);
    std::vector<std::string> errors(n_tasks);
    std::vector<char> ok(n_tasks, 0);
    const std::uint64_t model_seed = sub_seed(options.seed, "model");

    parallel_for(n_tasks, options.jobs, [&](std::size_t t) {
        const std::size_t c = t / folds.size();
        const std::size_t f = t % folds.size();
        try {
            const auto model = fit(ModelSpec{family, grid[c], model_seed}, data[f].X_fit, data[f].y_fit);
            const auto pred = model.predict(data[f].X_val);
            if (task == Task::Classification) {
                Eigen::Index hit = 0;
                for (Eigen::Index i = 0; i < pred.values.size(); ++i)
                    hit += pred.values(i) == data[f].y_val(i);
                scores[t] = double(hit) / double(pred.values.size());
            } else {
                scores[t] = -regression_metrics(pred.values, data[f].y_val).rmse;
            }
            if (!std::isfinite(scores[t]))
                throw Error("non-finite validation score");
            ok[t] = 1;
        } catch (const std::exception& e) {
            errors[t] = e.what();
        }
    });

    GridResult result;
    result.family = family;
    result.k = folds.size();
    bool any = false;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        ConfigScore cs;
        cs.params = grid[c];
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const std::size_t t = c * folds.size() + f;
            if (ok[t]) {
                cs.fold_scores.push_back(scores[t]);
            } else {
                ++cs.failed_folds;
                if (cs.error.empty())
                    cs.error = "fold " + std::to_string(f) + ": " + errors[t];
            }
        }
        if (cs.fold_scores.empty()) {
            cs.excluded = true;
        } else {
            const double m =
                std::accumulate(cs.fold_scores.begin(), cs.fold_scores.end(), 0.0) / double(cs.fold_scores.size());
            double ss = 0.0;
            for (double s : cs.fold_scores)
                ss += (s - m) * (s - m);
            cs.mean = m;
            cs.sd = std::sqrt(ss / double(cs.fold_scores.size()));
            if (!any || m > result.configs[result.best].mean)
                result.best = c;
            any = true;
        }
        result.configs.push_back(std::move(cs));
    }
    if (!any)
        throw Error("grid search: every " + std::string(to_string(family)) + " configuration failed (" +
                    result.configs.front().error + ")");
    return result;
}

nlohmann::json to_json(const ClassificationMetrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"specificity", m.specificity},
            {"confusion", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}},
            {"degenerate", m.degenerate}};
}

nlohmann::json to_json(const RegressionMetrics& m) { return {{"rmse", m.rmse}, {"mae", m.mae}}; }

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json doc;
    doc["format"] = "bleocc-report";
    doc["version"] = r.version;
    doc["task"] = r.task == Task::Classification ? "detection" : "counting";
    doc["representation"] = r.representation;
    doc["run_config"] = r.run_config;
    doc["seed"] = r.seed;
    doc["derived_seeds"] = r.derived_seeds;

    const auto& f = r.fingerprint;
    nlohmann::json balance = nlohmann::json::object();
    for (const auto& [label, rows] : f.class_balance)
        balance[std::to_string(label)] = rows;
    doc["dataset"] = {{"records", f.records},
                      {"transmitters", f.transmitters},
                      {"sampling_hz", f.sampling_hz},
                      {"rows", f.rows},
                      {"duplicate_rows_removed", f.duplicate_rows},
                      {"columns", f.columns},
                      {"selected_columns", f.selected_columns},
                      {"train_rows", f.train_rows},
                      {"test_rows", f.test_rows},
                      {"class_balance", balance},
                      {"content_hash", f.content_hash}};

    nlohmann::json fams = nlohmann::json::array();
    for (const auto& o : r.families) {
        nlohmann::json fj;
        fj["family"] = to_string(o.grid.family);
        fj["k"] = o.grid.k;
        if (o.failed) {
            fj["failed"] = true;
            fj["error"] = o.error;
            fams.push_back(fj);
            continue;
        }
        nlohmann::json configs = nlohmann::json::array();
        for (const auto& c : o.grid.configs) {
            nlohmann::json cj = {{"params", c.params}, {"fold_scores", c.fold_scores},
                                 {"failed_folds", c.failed_folds}, {"excluded", c.excluded}};
            if (!c.excluded) {
                cj["mean"] = c.mean;
                cj["sd"] = c.sd;
            }
            if (!c.error.empty())
                cj["error"] = c.error;
            configs.push_back(cj);
        }
        const auto& best = o.grid.configs[o.grid.best];
        fj["configs"] = configs;
        fj["best"] = {{"index", o.grid.best}, {"params", best.params}, {"cv_mean", best.mean}, {"cv_sd", best.sd}};
        fj["test"] = r.task == Task::Classification ? to_json(o.classification) : to_json(o.regression);
        fams.push_back(fj);
    }
    doc["families"] = fams;
    if (r.best_family >= 0)
        doc["best_family"] = to_string(r.families[std::size_t(r.best_family)].grid.family);
    else
        doc["best_family"] = nullptr;
    doc["notes"] = r.notes;
    return doc;
}

std::string scores_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "family,config_index,params,mean,sd,folds_ok,folds_failed,excluded,best\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& o : r.families) {
        if (o.failed)
            continue;
        for (std::size_t i = 0; i < o.grid.configs.size(); ++i) {
            const auto& c = o.grid.configs[i];
            out << to_string(o.grid.family) << ',' << i << ",\"" << params_to_string(c.params) << "\","
                << (c.excluded ? "" : num(c.mean)) << ',' << (c.excluded ? "" : num(c.sd)) << ','
                << c.fold_scores.size() << ',' << c.failed_folds << ',' << (c.excluded ? 1 : 0) << ','
                << (i == o.grid.best ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

} // namespace bleocc
