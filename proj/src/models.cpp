#include "bleocc/models.hpp"

#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"
#include "bleocc/keyvalue.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace bleocc {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Cartesian product, first dimension outermost.
std::vector<Params> cartesian(const std::vector<std::pair<std::string, std::vector<std::string>>>& dims) {
    std::vector<Params> out{Params{}};
    for (const auto& [name, values] : dims) {
        std::vector<Params> next;
        for (const auto& base : out)
            for (const auto& v : values) {
                Params p = base;
                p[name] = v;
                next.push_back(std::move(p));
            }
        out = std::move(next);
    }
    return out;
}

std::vector<std::pair<std::string, std::vector<std::string>>> grid_axes(Family f) {
    switch (f) {
    case Family::KNN:
    case Family::WKNN:
        return {{"k", {"1", "3", "5", "11"}}};
    case Family::LDA:
    case Family::QLDA:
    case Family::Linear:
        return {};
    case Family::SVM:
        return {{"kernel", {"linear", "polynomial", "sigmoid", "rbf"}},
                {"penalty", {"l1", "l2"}},
                {"loss", {"hinge", "squared_hinge"}},
                {"C", {"0.1", "1", "10"}}};
    case Family::GradientBoosting:
    case Family::RandomForest:
        return {{"n_trees", {"50", "200"}}, {"depth", {"4", "8", "unlimited"}}};
    case Family::Ridge:
        return {{"lambda", {"0.001", "0.1", "1"}}};
    case Family::Bayesian:
        return {{"lambda_init", {"0.001", "0.1", "1"}}};
    case Family::TheilSen:
        return {{"n_subsets", {"200", "500"}}};
    case Family::RANSAC:
        return {{"threshold_quantile", {"0.5"}}};
    }
    throw ContractError("unknown model family");
}

const std::set<std::string> kTextParams = {"kernel", "penalty", "loss"};

} // namespace

std::string_view to_string(Family f) {
    switch (f) {
    case Family::KNN: return "kNN";
    case Family::WKNN: return "WkNN";
    case Family::LDA: return "LDA";
    case Family::QLDA: return "QLDA";
    case Family::SVM: return "SVM";
    case Family::GradientBoosting: return "GradientBoosting";
    case Family::RandomForest: return "RandomForest";
    case Family::Linear: return "Linear";
    case Family::Ridge: return "Ridge";
    case Family::RANSAC: return "RANSAC";
    case Family::Bayesian: return "Bayesian";
    case Family::TheilSen: return "TheilSen";
    }
    return "unknown";
}

std::string_view to_string(Task t) {
    return t == Task::Classification ? "classification" : "regression";
}

Family family_from_string(std::string_view name) {
    const auto n = lower(name);
    static const std::map<std::string, Family> names = {
        {"knn", Family::KNN},
        {"wknn", Family::WKNN},
        {"lda", Family::LDA},
        {"qlda", Family::QLDA},
        {"qda", Family::QLDA},
        {"svm", Family::SVM},
        {"gradientboosting", Family::GradientBoosting},
        {"gradient_boosting", Family::GradientBoosting},
        {"gb", Family::GradientBoosting},
        {"randomforest", Family::RandomForest},
        {"random_forest", Family::RandomForest},
        {"rf", Family::RandomForest},
        {"linear", Family::Linear},
        {"ols", Family::Linear},
        {"ridge", Family::Ridge},
        {"ransac", Family::RANSAC},
        {"bayesian", Family::Bayesian},
        {"bayesianridge", Family::Bayesian},
        {"theilsen", Family::TheilSen},
        {"theil_sen", Family::TheilSen},
    };
    const auto it = names.find(n);
    if (it == names.end())
        throw ContractError("unknown model family '" + std::string(name) + "'");
    return it->second;
}

Task task_of(Family f) {
    switch (f) {
    case Family::KNN:
    case Family::WKNN:
    case Family::LDA:
    case Family::QLDA:
    case Family::SVM:
        return Task::Classification;
    default:
        return Task::Regression;
    }
}

const std::vector<Family>& classifier_families() {
    static const std::vector<Family> f = {Family::KNN, Family::WKNN, Family::LDA, Family::QLDA, Family::SVM};
    return f;
}

const std::vector<Family>& regressor_families() {
    static const std::vector<Family> f = {Family::GradientBoosting, Family::RandomForest, Family::Linear,
                                          Family::Ridge, Family::RANSAC, Family::Bayesian, Family::TheilSen};
    return f;
}

const std::vector<std::string>& grid_dimensions(Family f) {
    static const std::map<Family, std::vector<std::string>> dims = {
        {Family::KNN, {"k"}},
        {Family::WKNN, {"k"}},
        {Family::LDA, {}},
        {Family::QLDA, {}},
        {Family::SVM, {"kernel", "penalty", "loss", "C", "gamma", "degree", "coef0", "tol", "max_iter"}},
        {Family::GradientBoosting, {"n_trees", "depth", "learning_rate", "min_leaf"}},
        {Family::RandomForest, {"n_trees", "depth", "min_leaf", "max_features"}},
        {Family::Linear, {}},
        {Family::Ridge, {"lambda"}},
        {Family::RANSAC, {"threshold_quantile", "max_trials"}},
        {Family::Bayesian, {"lambda_init", "max_iter", "tol"}},
        {Family::TheilSen, {"n_subsets"}},
    };
    return dims.at(f);
}

void validate_spec(const ModelSpec& spec) {
    const auto& allowed = grid_dimensions(spec.family);
    for (const auto& [key, value] : spec.params) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ContractError(std::string(to_string(spec.family)) + " has no parameter '" + key + "'");
        if (kTextParams.contains(key) || key == "depth" || key == "max_features")
            continue;
        parse_double(value, 0);
    }
    // Constructing the estimator parses and range-checks every value.
    make_estimator(spec);
}

std::string params_to_string(const Params& params) {
    std::string out;
    for (const auto& [k, v] : params) {
        if (!out.empty())
            out += ';';
        out += k + "=" + v;
    }
    return out.empty() ? "default" : out;
}

std::vector<Params> default_grid(Family f) {
    auto grid = cartesian(grid_axes(f));
    if (f == Family::SVM)
        std::erase_if(grid, [](const Params& p) { return p.at("penalty") == "l1" && p.at("loss") == "hinge"; });
    return grid;
}

std::size_t cartesian_grid_size(Family f) { return cartesian(grid_axes(f)).size(); }

double ParamReader::number(const std::string& key, double fallback) const {
    const auto it = p_.find(key);
    return it == p_.end() ? fallback : parse_double(it->second, 0);
}

std::string ParamReader::text(const std::string& key, const std::string& fallback) const {
    const auto it = p_.find(key);
    return it == p_.end() ? fallback : lower(it->second);
}

int ParamReader::depth(const std::string& key, int fallback) const {
    const auto it = p_.find(key);
    if (it == p_.end())
        return fallback;
    const auto v = lower(it->second);
    if (v == "unlimited" || v == "none")
        return 0;
    const double d = parse_double(v, 0);
    if (d < 0 || d != std::floor(d))
        throw ContractError("depth must be a non-negative integer or 'unlimited'");
    return static_cast<int>(d);
}

ClassIndex index_classes(const Eigen::VectorXd& y, std::size_t min_classes) {
    ClassIndex ci;
    const std::set<double> distinct(y.begin(), y.end());
    ci.classes.assign(distinct.begin(), distinct.end());
    if (ci.classes.size() < min_classes)
        throw ContractError("classification needs at least " + std::to_string(min_classes) + " classes, got " +
                            std::to_string(ci.classes.size()));
    ci.codes.reserve(static_cast<std::size_t>(y.size()));
    for (double v : y)
        ci.codes.push_back(static_cast<int>(std::lower_bound(ci.classes.begin(), ci.classes.end(), v) -
                                            ci.classes.begin()));
    return ci;
}

std::unique_ptr<Estimator> make_estimator(const ModelSpec& spec) {
    const ParamReader r(spec.params);
    auto positive_int = [](double v, const char* what) {
        if (v < 1 || v != std::floor(v))
            throw ContractError(std::string(what) + " must be a positive integer");
        return static_cast<int>(v);
    };
    switch (spec.family) {
    case Family::KNN:
    case Family::WKNN:
        return std::make_unique<KnnClassifier>(positive_int(r.number("k", 5), "k"), spec.family == Family::WKNN);
    case Family::LDA:
        return std::make_unique<DiscriminantClassifier>(false);
    case Family::QLDA:
        return std::make_unique<DiscriminantClassifier>(true);
    case Family::SVM:
        return std::make_unique<SvmClassifier>(svm_options(spec.params, spec.seed));
    case Family::GradientBoosting: {
        TreeParams tp;
        tp.criterion = SplitCriterion::Variance;
        tp.max_depth = r.depth("depth", 4);
        tp.min_leaf = static_cast<std::size_t>(positive_int(r.number("min_leaf", 1), "min_leaf"));
        const double lr = r.number("learning_rate", 0.1);
        if (!(lr > 0.0 && lr <= 1.0))
            throw ContractError("learning_rate must lie in (0, 1]");
        return std::make_unique<BoostingRegressor>(
            static_cast<std::size_t>(positive_int(r.number("n_trees", 100), "n_trees")), tp, lr, spec.seed);
    }
    case Family::RandomForest: {
        ForestParams fp;
        fp.n_trees = static_cast<std::size_t>(positive_int(r.number("n_trees", 100), "n_trees"));
        fp.tree.criterion = SplitCriterion::Variance;
        fp.tree.max_depth = r.depth("depth", 0);
        fp.tree.min_leaf = static_cast<std::size_t>(positive_int(r.number("min_leaf", 1), "min_leaf"));
        fp.seed = spec.seed;
        // max_features: "third" (default), "sqrt", "all", or a fraction in (0, 1].
        FeatureSubset subset{FeatureSubset::Rule::Third};
        const auto mf = r.text("max_features", "third");
        if (mf == "sqrt")
            subset.rule = FeatureSubset::Rule::Sqrt;
        else if (mf == "all")
            subset.rule = FeatureSubset::Rule::All;
        else if (mf != "third") {
            subset.rule = FeatureSubset::Rule::Fraction;
            subset.fraction = parse_double(mf, 0);
            if (!(subset.fraction > 0.0 && subset.fraction <= 1.0))
                throw ContractError("max_features fraction must lie in (0, 1]");
        }
        return std::make_unique<ForestRegressor>(fp, subset);
    }
    case Family::Linear:
        return std::make_unique<OlsRegressor>();
    case Family::Ridge: {
        const double lambda = r.number("lambda", 1.0);
        if (lambda < 0.0)
            throw ContractError("ridge lambda must be non-negative");
        return std::make_unique<RidgeRegressor>(lambda);
    }
    case Family::RANSAC: {
        const double q = r.number("threshold_quantile", 0.5);
        if (!(q > 0.0 && q <= 1.0))
            throw ContractError("threshold_quantile must lie in (0, 1]");
        return std::make_unique<RansacRegressor>(q, positive_int(r.number("max_trials", 100), "max_trials"),
                                                 spec.seed);
    }
    case Family::Bayesian: {
        const double l = r.number("lambda_init", 1.0);
        if (!(l > 0.0))
            throw ContractError("lambda_init must be positive");
        return std::make_unique<BayesianRidgeRegressor>(l, positive_int(r.number("max_iter", 300), "max_iter"),
                                                        r.number("tol", 1e-4));
    }
    case Family::TheilSen:
        return std::make_unique<TheilSenRegressor>(positive_int(r.number("n_subsets", 500), "n_subsets"),
                                                   spec.seed);
    }
    throw ContractError("unknown model family");
}

int round_count(double value) {
    const double r = std::round(value); // half away from zero
    return r <= 0.0 ? 0 : static_cast<int>(r);
}

TrainedModel::TrainedModel(ModelSpec spec, std::size_t n_features, std::shared_ptr<const Estimator> estimator)
    : spec_(std::move(spec)), n_features_(n_features), estimator_(std::move(estimator)) {}

Prediction TrainedModel::predict(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != n_features_)
        throw ContractError("predict: model was fitted on " + std::to_string(n_features_) + " columns, got " +
                            std::to_string(X.cols()));
    Prediction p;
    p.values = estimator_->predict(X);
    p.counts.reserve(static_cast<std::size_t>(p.values.size()));
    for (double v : p.values)
        p.counts.push_back(task() == Task::Regression ? round_count(v) : static_cast<int>(std::lround(v)));
    return p;
}

nlohmann::json TrainedModel::to_json() const {
    nlohmann::json doc;
    doc["format"] = "bleocc-model";
    doc["version"] = 1;
    doc["family"] = std::string(to_string(spec_.family));
    doc["task"] = std::string(to_string(task()));
    doc["params"] = spec_.params;
    doc["seed"] = spec_.seed;
    doc["n_features"] = n_features_;
    doc["state"] = estimator_->save();
    return doc;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "bleocc-model" || doc.value("version", 0) != 1)
        throw Error("not a bleocc model artifact (format/version mismatch)");
    ModelSpec spec;
    spec.family = family_from_string(doc.at("family").get<std::string>());
    spec.params = doc.at("params").get<Params>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    auto est = make_estimator(spec);
    est->load(doc.at("state"));
    return TrainedModel(std::move(spec), doc.at("n_features").get<std::size_t>(), std::move(est));
}

TrainedModel fit(const ModelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() < 2)
        throw ContractError("fit needs at least 2 rows");
    if (X.rows() != y.size())
        throw ContractError("fit: target length does not match rows");
    if (!X.allFinite() || !y.allFinite())
        throw ContractError("fit: non-finite input");
    for (const auto& [key, value] : spec.params) {
        const auto& allowed = grid_dimensions(spec.family);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ContractError(std::string(to_string(spec.family)) + " has no parameter '" + key + "'");
    }
    auto est = make_estimator(spec);
    est->fit(X, y);
    return TrainedModel(spec, static_cast<std::size_t>(X.cols()), std::move(est));
}

Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& X) { return model.predict(X); }

nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

nlohmann::json to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Eigen::RowVectorXd r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != m.rows())
        throw Error("matrix row count mismatch in model artifact");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto r = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(r.size()) != m.cols())
            throw Error("matrix column count mismatch in model artifact");
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(i, c) = r[static_cast<std::size_t>(c)];
    }
    return m;
}

nlohmann::json tree_to_json(const DecisionTree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes())
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    return nodes;
}

DecisionTree tree_from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    for (const auto& n : j)
        nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                         n.at(4).get<double>()});
    return DecisionTree(std::move(nodes));
}

} // namespace bleocc
