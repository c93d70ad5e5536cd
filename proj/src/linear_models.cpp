#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"
#include "bleocc/rng.hpp"
#include "bleocc/stats.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bleocc {

namespace {

struct Centered {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::RowVectorXd x_mean;
    double y_mean = 0.0;
};

Centered center(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Centered c;
    c.x_mean = X.colwise().mean();
    c.y_mean = y.mean();
    c.X = X.rowwise() - c.x_mean;
    c.y = y.array() - c.y_mean;
    return c;
}

// Minimum-norm least squares for centered data.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return X.completeOrthogonalDecomposition().solve(y);
}

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const char* who) {
    if (X.rows() != y.size())
        throw ContractError(std::string(who) + ": target length does not match rows");
    if (X.rows() < 2)
        throw ContractError(std::string(who) + ": needs at least 2 rows");
}

// Fit with intercept on the given rows: returns [intercept, coef...].
Eigen::VectorXd fit_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
    Eigen::MatrixXd A(Eigen::Index(rows.size()), X.cols() + 1);
    Eigen::VectorXd b(Eigen::Index(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        A(Eigen::Index(r), 0) = 1.0;
        A.row(Eigen::Index(r)).tail(X.cols()) = X.row(Eigen::Index(rows[r]));
        b(Eigen::Index(r)) = y(Eigen::Index(rows[r]));
    }
    return A.completeOrthogonalDecomposition().solve(b);
}

} // namespace

Eigen::VectorXd LinearRegressorBase::predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != coef_.size())
        throw ContractError("linear model: column count mismatch");
    return (X * coef_).array() + intercept_;
}

nlohmann::json LinearRegressorBase::save() const { return {{"coef", to_json(coef_)}, {"intercept", intercept_}}; }

void LinearRegressorBase::load(const nlohmann::json& state) {
    coef_ = vector_from_json(state.at("coef"));
    intercept_ = state.at("intercept").get<double>();
}

void OlsRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_xy(X, y, "Linear");
    const auto c = center(X, y);
    coef_ = least_squares(c.X, c.y);
    intercept_ = c.y_mean - c.x_mean.dot(coef_);
}

void RidgeRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_xy(X, y, "Ridge");
    const auto c = center(X, y);
    Eigen::MatrixXd gram = c.X.transpose() * c.X;
    gram.diagonal().array() += lambda_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd rhs = c.X.transpose() * c.y;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14)
        coef_ = ldlt.solve(rhs);
    else // lambda = 0 on a rank-deficient design
        coef_ = least_squares(c.X, c.y);
    intercept_ = c.y_mean - c.x_mean.dot(coef_);
}

void RansacRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_xy(X, y, "RANSAC");
    const auto n = static_cast<std::size_t>(X.rows());
    const auto min_samples = static_cast<std::size_t>(X.cols()) + 1;
    if (n < min_samples)
        throw ContractError("RANSAC: needs at least n_features + 1 rows");

    // Inlier threshold: a quantile of |y - median(y)| (the MAD for q = 0.5).
    std::vector<double> dev(n);
    const double med = stats::median(std::span<const double>(y.data(), n));
    for (std::size_t i = 0; i < n; ++i)
        dev[i] = std::abs(y(Eigen::Index(i)) - med);
    threshold_ = stats::quantile(dev, quantile_);
    if (!(threshold_ > 0.0))
        threshold_ = 1e-12 * std::max(1.0, std::abs(med));

    Rng rng(seed_);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::size_t> best_inliers;
    double best_score = std::numeric_limits<double>::infinity();

    for (int trial = 0; trial < max_trials_; ++trial) {
        for (std::size_t i = 0; i < min_samples; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        const auto beta = fit_rows(X, y, std::span<const std::size_t>(pool.data(), min_samples));
        const Eigen::VectorXd resid = (y - ((X * beta.tail(X.cols())).array() + beta(0)).matrix()).cwiseAbs();

        std::vector<std::size_t> inliers;
        double resid_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (resid(Eigen::Index(i)) <= threshold_) {
                inliers.push_back(i);
                resid_sum += resid(Eigen::Index(i));
            }
        if (inliers.size() < min_samples)
            continue;
        if (inliers.size() > best_inliers.size() ||
            (inliers.size() == best_inliers.size() && resid_sum < best_score)) {
            best_inliers = std::move(inliers);
            best_score = resid_sum;
        }
    }
    if (best_inliers.empty())
        throw ContractError("RANSAC: no consensus set found");

    const auto beta = fit_rows(X, y, best_inliers);
    intercept_ = beta(0);
    coef_ = beta.tail(X.cols());
    inliers_ = std::move(best_inliers);
}

void BayesianRidgeRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_xy(X, y, "Bayesian");
    constexpr double a1 = 1e-6, a2 = 1e-6, l1 = 1e-6, l2 = 1e-6; // Gamma hyperpriors
    const auto c = center(X, y);
    const auto n = static_cast<double>(X.rows());

    Eigen::BDCSVD<Eigen::MatrixXd> svd(c.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::ArrayXd eig = sv.array().square();
    const Eigen::VectorXd uty = svd.matrixU().transpose() * c.y;

    const double var_y = c.y.squaredNorm() / n;
    alpha_ = 1.0 / (var_y > 0.0 ? var_y : 1.0);
    lambda_ = lambda_init_;
    coef_ = Eigen::VectorXd::Zero(X.cols());

    for (iterations_ = 1; iterations_ <= max_iter_; ++iterations_) {
        const Eigen::ArrayXd shrink = sv.array() / (eig + lambda_ / alpha_);
        const Eigen::VectorXd next = svd.matrixV() * (shrink * uty.array()).matrix();
        const double rss = (c.y - c.X * next).squaredNorm();
        const double gamma = (alpha_ * eig / (lambda_ + alpha_ * eig)).sum();
        lambda_ = (gamma + 2.0 * l1) / (next.squaredNorm() + 2.0 * l2);
        alpha_ = (n - gamma + 2.0 * a1) / (rss + 2.0 * a2);
        const double change = (next - coef_).cwiseAbs().sum();
        coef_ = next;
        if (iterations_ > 1 && change < tol_)
            break;
    }
    iterations_ = std::min(iterations_, max_iter_);
    const Eigen::ArrayXd shrink = sv.array() / (eig + lambda_ / alpha_);
    coef_ = svd.matrixV() * (shrink * uty.array()).matrix();
    intercept_ = c.y_mean - c.x_mean.dot(coef_);
}

Eigen::VectorXd spatial_median(const Eigen::MatrixXd& points, int max_iter, double tol) {
    if (points.rows() == 0)
        throw ContractError("spatial_median: no points");
    Eigen::VectorXd m = points.colwise().mean().transpose();
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(points.cols());
        double denom = 0.0;
        Eigen::Index coincident = 0;
        Eigen::VectorXd pull = Eigen::VectorXd::Zero(points.cols());
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const Eigen::VectorXd diff = points.row(i).transpose() - m;
            const double d = diff.norm();
            if (d <= 1e-14) {
                ++coincident;
                continue;
            }
            num += points.row(i).transpose() / d;
            denom += 1.0 / d;
            pull += diff / d;
        }
        if (denom == 0.0)
            return m; // every point sits on the estimate
        Eigen::VectorXd next = num / denom;
        if (coincident > 0) {
            // Vardi-Zhang modification for an estimate lying on a data point.
            const double r = pull.norm();
            const double eta = static_cast<double>(coincident) / r;
            if (r <= static_cast<double>(coincident))
                return m;
            next = std::max(0.0, 1.0 - eta) * next + std::min(1.0, eta) * m;
        }
        const double step = (next - m).norm();
        m = std::move(next);
        if (step <= tol * std::max(1.0, m.norm()))
            break;
    }
    return m;
}

void TheilSenRegressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_xy(X, y, "TheilSen");
    const auto n = static_cast<std::size_t>(X.rows());
    const auto k = static_cast<std::size_t>(X.cols()) + 1;
    if (n < k)
        throw ContractError("TheilSen: needs at least n_features + 1 rows (" + std::to_string(k) + "), got " +
                            std::to_string(n));

    // Number of k-subsets, capped to avoid overflow.
    double combos = 1.0;
    for (std::size_t i = 0; i < k && combos <= double(n_subsets_); ++i)
        combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);

    std::vector<Eigen::VectorXd> fits;
    if (combos <= static_cast<double>(n_subsets_)) {
        std::vector<std::size_t> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            fits.push_back(fit_rows(X, y, idx));
            std::size_t pos = k;
            while (pos > 0 && idx[pos - 1] == n - k + pos - 1)
                --pos;
            if (pos == 0)
                break;
            ++idx[pos - 1];
            for (std::size_t j = pos; j < k; ++j)
                idx[j] = idx[j - 1] + 1;
        }
    } else {
        Rng rng(seed_);
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int s = 0; s < n_subsets_; ++s) {
            for (std::size_t i = 0; i < k; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(pool[i], pool[pick(rng)]);
            }
            fits.push_back(fit_rows(X, y, std::span<const std::size_t>(pool.data(), k)));
        }
    }

    Eigen::MatrixXd points(Eigen::Index(fits.size()), Eigen::Index(k));
    for (std::size_t i = 0; i < fits.size(); ++i)
        points.row(Eigen::Index(i)) = fits[i].transpose();
    const auto med = spatial_median(points);
    intercept_ = med(0);
    coef_ = med.tail(X.cols());
}

} // namespace bleocc
