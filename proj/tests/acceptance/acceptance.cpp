#include "bleocc/estimators.hpp"
#include "bleocc/evaluation.hpp"
#include "bleocc/features.hpp"
#include "bleocc/pipeline.hpp"
#include "bleocc/preprocess.hpp"
#include "bleocc/rng.hpp"
#include "bleocc/simulator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace bleocc;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass)
                detail = "failed: " + what;
            pass = false;
        }
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= limit_s) {
        o.pass = false;
        o.detail += (o.detail.empty() ? "" : "; ") + std::string("too slow");
    }
    failures += !o.pass;
    std::printf("criterion %d %s  %s: %s [%.2f s, limit %.0f s]\n", id, o.pass ? "PASS" : "FAIL", title,
                o.detail.c_str(), secs, limit_s);
    std::fflush(stdout);
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (double(v.size()) - 1) * q;
    const auto lo = std::size_t(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

// 1 ---------------------------------------------------------------------------

Outcome metric_oracles() {
    Outcome o;
    Rng rng(2024);
    std::uniform_int_distribution<int> cell(0, 40);
    std::uniform_int_distribution<int> len(1, 80), small(-4, 4);
    std::uniform_real_distribution<double> real(-3, 3);
    int fixtures = 0;
    for (int f = 0; f < 25; ++f, ++fixtures) {
        // zero cells appear often so the degenerate ratios are exercised too
        int c[4];
        for (int& v : c)
            v = cell(rng) < 8 ? 0 : cell(rng);
        if (c[0] + c[1] + c[2] + c[3] == 0)
            c[0] = 1;
        const auto [tp, fp, tn, fn] = std::tuple{c[0], c[1], c[2], c[3]};
        std::vector<std::pair<double, double>> rows;
        rows.insert(rows.end(), std::size_t(tp), {1.0, 1.0});
        rows.insert(rows.end(), std::size_t(fp), {1.0, 0.0});
        rows.insert(rows.end(), std::size_t(tn), {0.0, 0.0});
        rows.insert(rows.end(), std::size_t(fn), {0.0, 1.0});
        std::shuffle(rows.begin(), rows.end(), rng);
        std::vector<double> pred, truth;
        for (auto [p, t] : rows) {
            pred.push_back(p);
            truth.push_back(t);
        }
        const auto m = classification_metrics(std::span<const double>(pred), std::span<const double>(truth));
        auto ratio = [](int num, int den) { return den == 0 ? 1.0 : double(num) / double(den); };
        o.require(m.counts.tp == std::size_t(tp) && m.counts.fp == std::size_t(fp) && m.counts.tn == std::size_t(tn) &&
                      m.counts.fn == std::size_t(fn),
                  "confusion counts");
        o.require(m.precision == ratio(tp, tp + fp), "precision");
        o.require(m.recall == ratio(tp, tp + fn), "recall");
        o.require(m.specificity == ratio(tn, tn + fp), "specificity");
        o.require(m.accuracy == ratio(tp + tn, tp + fp + tn + fn), "accuracy");
    }
    for (int f = 0; f < 25; ++f, ++fixtures) {
        const int n = len(rng);
        std::vector<double> pred(static_cast<std::size_t>(n)), truth(static_cast<std::size_t>(n));
        const bool integral = f % 2 == 0;
        for (int i = 0; i < n; ++i) {
            truth[std::size_t(i)] = integral ? std::abs(small(rng)) : real(rng);
            pred[std::size_t(i)] = integral ? truth[std::size_t(i)] + small(rng) : real(rng);
        }
        const auto m = regression_metrics(std::span<const double>(pred), std::span<const double>(truth));
        if (integral) {
            // integer errors: both sums are exact, so the results must match bit for bit
            long long sa = 0, ss = 0;
            for (int i = 0; i < n; ++i) {
                const auto e = (long long)(pred[std::size_t(i)] - truth[std::size_t(i)]);
                sa += std::llabs(e);
                ss += e * e;
            }
            o.require(m.mae == double(sa) / double(n), "integer MAE");
            o.require(m.rmse == std::sqrt(double(ss) / double(n)), "integer RMSE");
        } else {
            long double sa = 0, ss = 0;
            for (int i = 0; i < n; ++i) {
                const long double e = (long double)pred[std::size_t(i)] - truth[std::size_t(i)];
                sa += std::fabs(e);
                ss += e * e;
            }
            const double mae = double(sa / n), rmse = double(std::sqrt(ss / n));
            o.require(std::abs(m.mae - mae) <= 1e-12 * std::max(1.0, mae), "real MAE");
            o.require(std::abs(m.rmse - rmse) <= 1e-12 * std::max(1.0, rmse), "real RMSE");
        }
    }
    if (o.pass)
        o.detail = std::to_string(fixtures) + " fixtures match";
    return o;
}

// 2 ---------------------------------------------------------------------------

Outcome scaler_contract() {
    Outcome o;
    Rng rng(77);
    std::uniform_int_distribution<int> rows(8, 300), cols(1, 12);
    std::uniform_real_distribution<double> loc(-90, 0), spread(0.01, 30);
    double worst = 0;
    std::size_t checked = 0;
    for (int m = 0; m < 20; ++m) {
        const int r = rows(rng), c = cols(rng);
        Eigen::MatrixXd X(r, c);
        for (int j = 0; j < c; ++j) {
            std::normal_distribution<double> g(loc(rng), spread(rng));
            std::exponential_distribution<double> e(1.0 / spread(rng));
            for (int i = 0; i < r; ++i)
                X(i, j) = j % 3 == 2 ? e(rng) : g(rng);
        }
        const auto p = fit_scaler(X);
        const Eigen::MatrixXd Z = apply_scaler(X, p);
        for (int j = 0; j < c; ++j) {
            if (!(p.q3[std::size_t(j)] > p.q1[std::size_t(j)]))
                continue;
            std::vector<double> col(Z.col(j).data(), Z.col(j).data() + r);
            const double med = quantile(col, 0.5);
            const double iqr = quantile(col, 0.75) - quantile(col, 0.25);
            worst = std::max({worst, std::abs(med), std::abs(iqr - 1.0)});
            ++checked;
        }
    }
    o.require(worst <= 1e-9, "median/IQR deviation " + fmt("%.3g", worst));

    ScalerParams example{{2.0}, {3.0}, {4.0}};
    Eigen::MatrixXd five(1, 1);
    five(0, 0) = 5.0;
    o.require(apply_scaler(five, example)(0, 0) == 1.0, "x=5 example");
    if (o.pass)
        o.detail = std::to_string(checked) + " columns within " + fmt("%.2g", worst) + ", x=5 -> 1";
    return o;
}

// 3 ---------------------------------------------------------------------------

std::size_t freq_col(std::string_view name) {
    const auto& n = freq_feature_names();
    return std::size_t(std::find(n.begin(), n.end(), name) - n.begin());
}

Outcome feature_oracles() {
    Outcome o;
    // constant signal: all spread, shape and spectral features vanish
    const std::vector<double> flat(200, -63.0);
    const auto tf = time_features(flat);
    const auto& tn = time_feature_names();
    for (std::size_t i = 0; i < tn.size(); ++i) {
        const std::string name(tn[i]);
        if (name.rfind("ecdf_", 0) == 0)
            o.require(tf[i] == 1.0, "constant " + name);
        for (auto level : {"max", "min", "mean", "median", "p10", "p90"})
            if (name == level)
                o.require(tf[i] == -63.0, "constant " + name);
        for (auto zero : {"std", "range", "skewness", "kurtosis", "iqr", "time_weighted_variance", "ar_1", "ar_2",
                          "ar_3", "ar_4", "mean_amplitude_deviation", "mean_power_deviation", "sum_below_p10",
                          "sum_above_p90"})
            if (name == zero)
                o.require(tf[i] == 0.0, "constant " + name);
    }
    for (double v : freq_features(flat, 200).values)
        o.require(v == 0.0, "constant spectrum");

    // 2 Hz tone, 200 Hz, 1 s
    std::vector<double> tone(200);
    for (std::size_t i = 0; i < tone.size(); ++i)
        tone[i] = -60.0 + 4.0 * std::sin(2 * kPi * 2.0 * double(i) / 200.0);
    const auto spec = power_spectrum(tone, 200.0);
    const double bin = 200.0 / double(spec.fft_length);
    const double dom = freq_features(tone, 200.0).values[freq_col("dominant_freq_hz")];
    o.require(std::abs(dom - 2.0) <= bin, "dominant frequency " + fmt("%.4g", dom));

    // Parseval: direct DFT against the library spectrum, and sub-bands against the total
    Rng rng(31);
    double worst_full = 0, worst_band = 0;
    for (double fs : {20.0, 45.0, 100.0, 200.0})
        for (int trial = 0; trial < 5; ++trial) {
            std::normal_distribution<double> g(-60, 2);
            std::vector<double> x(static_cast<std::size_t>(fs));
            for (auto& v : x)
                v = std::round(g(rng));
            const auto w = hann_windowed(x);
            const auto s = power_spectrum(x, fs);
            const std::size_t N = s.fft_length;
            const double energy = std::inner_product(w.begin(), w.end(), w.begin(), 0.0) / double(N);
            if (energy == 0.0)
                continue;
            double direct = 0;
            for (std::size_t k = 0; k <= N / 2; ++k) {
                std::complex<double> acc = 0;
                for (std::size_t t = 0; t < w.size(); ++t)
                    acc += w[t] * std::polar(1.0, -2 * kPi * double(k * t) / double(N));
                const double p = std::norm(acc) / (double(N) * double(N));
                direct += (k == 0 || k == N / 2) ? p : 2 * p;
            }
            const double lib = std::accumulate(s.power.begin(), s.power.end(), 0.0);
            worst_full = std::max({worst_full, std::abs(direct - energy) / energy, std::abs(lib - energy) / energy});
            const auto v = freq_features(x, fs).values;
            double bands = 0;
            for (int b = 1; b <= 4; ++b)
                bands += v[freq_col("band_energy_" + std::to_string(b))];
            worst_band = std::max(worst_band, std::abs(bands - energy) / energy);
        }
    o.require(worst_full <= 1e-10, "Parseval " + fmt("%.3g", worst_full));
    o.require(worst_band <= 1e-6, "sub-band Parseval " + fmt("%.3g", worst_band));
    if (o.pass)
        o.detail = "constant ok, tone at " + fmt("%.3f", dom) + " Hz (bin " + fmt("%.3f", bin) + "), Parseval " +
                   fmt("%.1g", worst_full) + ", sub-bands " + fmt("%.1g", worst_band);
    return o;
}

// 4 ---------------------------------------------------------------------------

struct Data {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Data clouds(Rng& rng, Eigen::Index per_class, double separation) {
    std::normal_distribution<double> g(0, 1);
    Data d{Eigen::MatrixXd(2 * per_class, 3), Eigen::VectorXd(2 * per_class)};
    for (Eigen::Index i = 0; i < 2 * per_class; ++i) {
        const int c = i < per_class ? 0 : 1;
        for (Eigen::Index j = 0; j < 3; ++j)
            d.X(i, j) = g(rng) + (j == 0 ? separation * c : 0.0);
        d.y(i) = c;
    }
    return d;
}

Data linear(Rng& rng, Eigen::Index n, double noise) {
    std::uniform_real_distribution<double> u(-5, 5);
    std::normal_distribution<double> g(0, noise > 0 ? noise : 1);
    Data d{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j)
            d.X(i, j) = u(rng);
        d.y(i) = 1.5 * d.X(i, 0) - 2.0 * d.X(i, 1) + 0.5 * d.X(i, 2) + 4.0 + (noise > 0 ? g(rng) : 0.0);
    }
    return d;
}

Outcome model_sanity() {
    Outcome o;
    Rng rng(5);

    const auto overlap = clouds(rng, 80, 0.5);
    for (auto f : {Family::KNN, Family::WKNN}) {
        const auto p = fit(ModelSpec{f, {{"k", "1"}}, 0}, overlap.X, overlap.y).predict(overlap.X).values;
        o.require(p == overlap.y, "1-NN self-consistency");
    }

    const auto exact = linear(rng, 60, 0.0);
    const auto ols = fit(ModelSpec{Family::Linear, {}, 0}, exact.X, exact.y);
    const auto& oc = dynamic_cast<const LinearRegressorBase&>(ols.estimator());
    Eigen::Vector3d truth(1.5, -2.0, 0.5);
    const double ols_err = std::max((oc.coef() - truth).cwiseAbs().maxCoeff(), std::abs(oc.intercept() - 4.0));
    o.require(ols_err <= 1e-8, "OLS recovery " + fmt("%.3g", ols_err));

    const auto noisy = linear(rng, 80, 1.0);
    const auto a = fit(ModelSpec{Family::Linear, {}, 0}, noisy.X, noisy.y);
    const auto b = fit(ModelSpec{Family::Ridge, {{"lambda", "0"}}, 0}, noisy.X, noisy.y);
    const auto& ca = dynamic_cast<const LinearRegressorBase&>(a.estimator());
    const auto& cb = dynamic_cast<const LinearRegressorBase&>(b.estimator());
    const double ridge_gap =
        std::max((ca.coef() - cb.coef()).cwiseAbs().maxCoeff(), std::abs(ca.intercept() - cb.intercept()));
    o.require(ridge_gap <= 1e-8, "Ridge(0) vs OLS " + fmt("%.3g", ridge_gap));

    const Eigen::Index n = 200;
    std::uniform_real_distribution<double> u(0, 10), gross(20, 60);
    std::normal_distribution<double> jitter(0, 0.01);
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = u(rng);
        y(i) = 3.0 * X(i, 0) + 1.0 + (i % 10 < 3 ? gross(rng) : jitter(rng));
    }
    const auto r = fit(ModelSpec{Family::RANSAC, {}, 9}, X, y);
    const double slope_err = std::abs(dynamic_cast<const LinearRegressorBase&>(r.estimator()).coef()(0) - 3.0);
    o.require(slope_err <= 1e-2, "RANSAC slope error " + fmt("%.3g", slope_err));

    const auto gb = fit(ModelSpec{Family::GradientBoosting, {{"n_trees", "200"}, {"learning_rate", "0.1"}}, 3},
                        noisy.X, noisy.y);
    const auto& loss = dynamic_cast<const BoostingRegressor&>(gb.estimator()).training_loss();
    bool monotone = loss.size() == 201;
    for (std::size_t i = 1; i < loss.size(); ++i)
        monotone = monotone && loss[i] <= loss[i - 1];
    o.require(monotone, "boosting loss monotone");

    std::size_t configs = 0;
    const auto cls = clouds(rng, 40, 3.0);
    const auto reg = linear(rng, 80, 0.3);
    std::uniform_real_distribution<double> q(-4, 6);
    Eigen::MatrixXd probe(25, 3);
    for (Eigen::Index i = 0; i < probe.size(); ++i)
        probe(i) = q(rng);
    for (auto f : classifier_families())
        for (const auto& p : default_grid(f)) {
            const auto m1 = fit(ModelSpec{f, p, 77}, cls.X, cls.y);
            const auto m2 = fit(ModelSpec{f, p, 77}, cls.X, cls.y);
            o.require(m1.predict(probe).values == m2.predict(probe).values && m1.to_json() == m2.to_json(),
                      "determinism of " + std::string(to_string(f)));
            ++configs;
        }
    for (auto f : regressor_families())
        for (const auto& p : default_grid(f)) {
            const auto m1 = fit(ModelSpec{f, p, 77}, reg.X, reg.y);
            const auto m2 = fit(ModelSpec{f, p, 77}, reg.X, reg.y);
            o.require(m1.predict(probe).values == m2.predict(probe).values && m1.to_json() == m2.to_json(),
                      "determinism of " + std::string(to_string(f)));
            ++configs;
        }
    for (const std::uint64_t seed : {1u, 2u}) {
        const auto ya = kfold_split(std::span<const double>(cls.y.data(), std::size_t(cls.y.size())),
                                    Task::Classification, 5, seed);
        const auto yb = kfold_split(std::span<const double>(cls.y.data(), std::size_t(cls.y.size())),
                                    Task::Classification, 5, seed);
        for (std::size_t k = 0; k < ya.size(); ++k)
            o.require(ya[k].validate == yb[k].validate, "fold determinism");
    }

    if (o.pass)
        o.detail = "OLS " + fmt("%.1g", ols_err) + ", Ridge(0) gap " + fmt("%.1g", ridge_gap) + ", RANSAC slope error " +
                   fmt("%.1g", slope_err) + ", " + std::to_string(configs) + " configs deterministic";
    return o;
}

// 5-8 -------------------------------------------------------------------------

ScenarioConfig scenario(double hz) {
    ScenarioConfig c;
    c.transmitters = {{"AA:BB:CC:DD:EE:01", 25}, {"AA:BB:CC:DD:EE:02", 500}, {"AA:BB:CC:DD:EE:03", 100},
                      {"AA:BB:CC:DD:EE:04", 300}};
    c.sampling_hz = hz;
    c.duration_s = 600;
    c.schedule = cycling_schedule({0, 1, 2, 3}, 30.0, c.duration_s);
    c.path_loss = {-45.0, 100.0, 2.2, 1.0};
    c.body_effect = {6.0, 0.0, 0.0};
    c.seed = 7;
    return c;
}

EvalReport evaluate(const RssiDataset& d, Task task, Representation rep, Family family) {
    PipelineConfig c;
    c.task = task;
    c.representation = rep;
    c.families = {family};
    c.seed = 7;
    return run_pipeline(d, c).report;
}

const FamilyOutcome& only(const EvalReport& r) {
    if (r.families.size() != 1 || r.families[0].failed)
        throw std::runtime_error("family failed: " + (r.families.empty() ? std::string() : r.families[0].error));
    return r.families[0];
}

} // namespace

int main() {
    std::printf("bleocc %s acceptance\n", std::string(library_version()).c_str());
    criterion(1, "metric oracle equivalence", 1, metric_oracles);
    criterion(2, "scaler contract", 1, scaler_contract);
    criterion(3, "feature oracles", 5, feature_oracles);
    criterion(4, "model sanity suite", 30, model_sanity);

    const auto d45 = simulate(scenario(45));

    criterion(5, "end-to-end detection", 180, [&] {
        Outcome o;
        const auto report = evaluate(d45, Task::Classification, Representation::Features, Family::SVM);
        const auto& f = only(report);
        const double acc = f.classification.accuracy;
        o.require(acc >= 0.95, "accuracy " + fmt("%.4f", acc) + " < 0.95");
        if (o.pass)
            o.detail = "SVM test accuracy " + fmt("%.4f", acc) + " >= 0.95 (" +
                       params_to_string(f.grid.configs[f.grid.best].params) + ")";
        return o;
    });

    criterion(6, "end-to-end counting", 180, [&] {
        Outcome o;
        const auto report = evaluate(d45, Task::Regression, Representation::Features, Family::RandomForest);
        const auto& f = only(report);
        o.require(f.regression.mae <= 0.5, "MAE " + fmt("%.4f", f.regression.mae) + " > 0.5");
        o.require(f.regression.rmse <= 0.8, "RMSE " + fmt("%.4f", f.regression.rmse) + " > 0.8");
        if (o.pass)
            o.detail = "RandomForest MAE " + fmt("%.4f", f.regression.mae) + " <= 0.5, RMSE " +
                       fmt("%.4f", f.regression.rmse) + " <= 0.8";
        return o;
    });

    criterion(7, "frequency-degradation trend", 300, [&] {
        Outcome o;
        double acc[2], rmse[2];
        const double rates[2] = {20, 200};
        for (int i = 0; i < 2; ++i) {
            const auto d = simulate(scenario(rates[i]));
            acc[i] = only(evaluate(d, Task::Classification, Representation::Features, Family::SVM)).classification.accuracy;
            rmse[i] = only(evaluate(d, Task::Regression, Representation::Features, Family::RandomForest)).regression.rmse;
        }
        o.require(acc[1] >= acc[0], "accuracy 200 Hz " + fmt("%.4f", acc[1]) + " < 20 Hz " + fmt("%.4f", acc[0]));
        o.require(rmse[1] <= rmse[0], "RMSE 200 Hz " + fmt("%.4f", rmse[1]) + " > 20 Hz " + fmt("%.4f", rmse[0]));
        if (o.pass)
            o.detail = "accuracy 200 Hz " + fmt("%.4f", acc[1]) + " >= 20 Hz " + fmt("%.4f", acc[0]) +
                       ", RMSE 200 Hz " + fmt("%.4f", rmse[1]) + " <= 20 Hz " + fmt("%.4f", rmse[0]);
        return o;
    });

    criterion(8, "features beat raw for counting", 300, [&] {
        Outcome o;
        const double feat =
            only(evaluate(d45, Task::Regression, Representation::Features, Family::RandomForest)).regression.rmse;
        const double raw = only(evaluate(d45, Task::Regression, Representation::Raw, Family::RandomForest)).regression.rmse;
        o.require(feat <= raw, "features RMSE " + fmt("%.4f", feat) + " > raw " + fmt("%.4f", raw));
        if (o.pass)
            o.detail = "features RMSE " + fmt("%.4f", feat) + " <= raw RMSE " + fmt("%.4f", raw);
        return o;
    });

    std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
