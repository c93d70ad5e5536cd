#include "bleocc/preprocess.hpp"

#include "bleocc/error.hpp"
#include "bleocc/keyvalue.hpp"
#include "bleocc/stats.hpp"
#include "bleocc/tree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace bleocc {

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i)
        out << (i ? " " : "") << v[i];
    return out.str();
}

std::vector<double> parse_doubles(const KeyValueEntry& e) {
    std::vector<double> out;
    std::istringstream in(e.value);
    std::string tok;
    while (in >> tok)
        out.push_back(parse_double(tok, e.line));
    return out;
}

} // namespace

ScalerParams fit_scaler(const Eigen::MatrixXd& train) {
    if (train.rows() == 0)
        throw ContractError("fit_scaler: empty matrix");
    ScalerParams p;
    const auto cols = static_cast<std::size_t>(train.cols());
    p.q1.resize(cols);
    p.q2.resize(cols);
    p.q3.resize(cols);
    std::vector<double> col(static_cast<std::size_t>(train.rows()));
    for (std::size_t j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < train.rows(); ++i)
            col[static_cast<std::size_t>(i)] = train(i, Eigen::Index(j));
        std::sort(col.begin(), col.end());
        p.q1[j] = stats::quantile_sorted(col, 0.25);
        p.q2[j] = stats::quantile_sorted(col, 0.50);
        p.q3[j] = stats::quantile_sorted(col, 0.75);
    }
    return p;
}

Eigen::MatrixXd apply_scaler(const Eigen::MatrixXd& m, const ScalerParams& p) {
    if (static_cast<std::size_t>(m.cols()) != p.columns())
        throw ContractError("apply_scaler: matrix has " + std::to_string(m.cols()) +
                            " columns, scaler was fitted on " + std::to_string(p.columns()));
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const auto c = static_cast<std::size_t>(j);
        const double iqr = p.q3[c] - p.q1[c];
        const double divisor = iqr > 0.0 ? iqr : 1.0;
        out.col(j) = (m.col(j).array() - p.q2[c]) / divisor;
    }
    return out;
}

FeatureMatrix apply_scaler(const FeatureMatrix& m, const ScalerParams& p) {
    FeatureMatrix out = m;
    out.values = apply_scaler(m.values, p);
    return out;
}

SelectionMask select_features(const Eigen::MatrixXd& train, const Eigen::VectorXd& labels,
                              const SelectionConfig& config) {
    if (train.rows() != labels.size())
        throw ContractError("select_features: label count does not match rows");
    if (train.cols() == 0)
        throw ContractError("select_features: no columns");
    const std::set<double> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        throw ContractError("select_features: degenerate labels (fewer than 2 distinct values)");

    // Exactly identical columns are indistinguishable to a tree: fit on one
    // representative per group and share the group's importance evenly.
    const auto p = static_cast<std::size_t>(train.cols());
    std::vector<std::size_t> group_of(p);
    std::vector<std::size_t> representatives;
    {
        std::map<std::vector<double>, std::size_t> seen;
        for (std::size_t j = 0; j < p; ++j) {
            const auto& c = train.col(Eigen::Index(j));
            std::vector<double> key(c.begin(), c.end());
            const auto [it, inserted] = seen.emplace(std::move(key), representatives.size());
            if (inserted)
                representatives.push_back(j);
            group_of[j] = it->second;
        }
    }
    Eigen::MatrixXd reduced(train.rows(), static_cast<Eigen::Index>(representatives.size()));
    for (std::size_t g = 0; g < representatives.size(); ++g)
        reduced.col(Eigen::Index(g)) = train.col(Eigen::Index(representatives[g]));
    const std::size_t q = representatives.size();

    ForestParams fp;
    fp.n_trees = config.n_trees;
    fp.seed = config.seed;
    fp.tree.min_leaf = config.min_leaf;
    if (config.task == SelectionTask::Classification) {
        fp.tree.criterion = SplitCriterion::Gini;
        fp.tree.max_features = FeatureSubset{FeatureSubset::Rule::Sqrt}.resolve(q);
    } else {
        fp.tree.criterion = SplitCriterion::Variance;
        fp.tree.max_features = FeatureSubset{FeatureSubset::Rule::Third}.resolve(q);
    }

    // Gini trees need class codes 0..K-1.
    std::vector<double> y(static_cast<std::size_t>(labels.size()));
    if (config.task == SelectionTask::Classification) {
        const std::vector<double> classes(distinct.begin(), distinct.end());
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = static_cast<double>(std::lower_bound(classes.begin(), classes.end(), labels(Eigen::Index(i))) -
                                       classes.begin());
    } else {
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = labels(Eigen::Index(i));
    }

    RandomForest forest;
    forest.fit(reduced, y, fp);

    std::vector<std::size_t> group_size(q, 0);
    for (auto g : group_of)
        ++group_size[g];

    SelectionMask mask;
    mask.importances.resize(p);
    for (std::size_t j = 0; j < p; ++j)
        mask.importances[j] = forest.importances()[group_of[j]] / static_cast<double>(group_size[group_of[j]]);
    const double mean = 1.0 / static_cast<double>(p);
    for (std::size_t j = 0; j < p; ++j)
        // Relative slack so exactly-uniform importances are not lost to rounding.
        if (mask.importances[j] >= mean * (1.0 - 1e-9))
            mask.kept.push_back(j);
    if (mask.kept.empty()) {
        const auto top = std::max_element(mask.importances.begin(), mask.importances.end());
        mask.kept.push_back(static_cast<std::size_t>(top - mask.importances.begin()));
    }
    return mask;
}

FeatureMatrix apply_selection(const FeatureMatrix& m, const SelectionMask& mask) {
    if (!mask.importances.empty() && mask.importances.size() != m.cols())
        throw ContractError("apply_selection: mask was fitted on a different column count");
    return m.select_cols(mask.kept);
}

std::string serialize_preprocess(const ScalerParams& scaler, const SelectionMask* mask) {
    KeyValueDoc doc;
    doc.add("format", "bleocc-preprocess-1");
    doc.add("scaler.q1", join_doubles(scaler.q1));
    doc.add("scaler.q2", join_doubles(scaler.q2));
    doc.add("scaler.q3", join_doubles(scaler.q3));
    if (mask) {
        std::string kept;
        for (std::size_t i = 0; i < mask->kept.size(); ++i)
            kept += (i ? " " : "") + std::to_string(mask->kept[i]);
        doc.add("selection.kept", kept);
        doc.add("selection.importances", join_doubles(mask->importances));
    }
    return doc.to_string();
}

void parse_preprocess(std::string_view text, ScalerParams& scaler, SelectionMask& mask, bool& has_mask) {
    const auto doc = KeyValueDoc::parse(text);
    const auto* format = doc.find("format");
    if (!format || format->value != "bleocc-preprocess-1")
        throw ParseError(format ? format->line : 1, "not a bleocc preprocess sidecar");
    auto need = [&doc](std::string_view key) -> const KeyValueEntry& {
        const auto* e = doc.find(key);
        if (!e)
            throw ParseError(0, "missing key '" + std::string(key) + "'");
        return *e;
    };
    scaler.q1 = parse_doubles(need("scaler.q1"));
    scaler.q2 = parse_doubles(need("scaler.q2"));
    scaler.q3 = parse_doubles(need("scaler.q3"));
    if (scaler.q1.size() != scaler.q2.size() || scaler.q2.size() != scaler.q3.size())
        throw ParseError(0, "scaler quartile vectors differ in length");
    has_mask = doc.find("selection.kept") != nullptr;
    mask = {};
    if (has_mask) {
        for (double v : parse_doubles(need("selection.kept")))
            mask.kept.push_back(static_cast<std::size_t>(v));
        mask.importances = parse_doubles(need("selection.importances"));
    }
}

} // namespace bleocc
