#include "bleocc/error.hpp"
#include "bleocc/estimators.hpp"
#include "bleocc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bleocc {

namespace {

SvmKernel parse_kernel(const std::string& s) {
    if (s == "linear") return SvmKernel::Linear;
    if (s == "polynomial" || s == "poly") return SvmKernel::Polynomial;
    if (s == "sigmoid") return SvmKernel::Sigmoid;
    if (s == "rbf" || s == "radial_basis_function") return SvmKernel::Rbf;
    throw ContractError("unknown SVM kernel '" + s + "'");
}

std::string kernel_name(SvmKernel k) {
    switch (k) {
    case SvmKernel::Linear: return "linear";
    case SvmKernel::Polynomial: return "polynomial";
    case SvmKernel::Sigmoid: return "sigmoid";
    case SvmKernel::Rbf: return "rbf";
    }
    return "linear";
}

} // namespace

SvmOptions svm_options(const Params& params, std::uint64_t seed) {
    const ParamReader r(params);
    SvmOptions o;
    o.kernel = parse_kernel(r.text("kernel", "linear"));

    const auto penalty = r.text("penalty", "l2");
    if (penalty == "l1") o.penalty = SvmPenalty::L1;
    else if (penalty == "l2") o.penalty = SvmPenalty::L2;
    else throw ContractError("unknown SVM penalty '" + penalty + "'");

    const auto loss = r.text("loss", "squared_hinge");
    if (loss == "hinge") o.loss = SvmLoss::Hinge;
    else if (loss == "squared_hinge") o.loss = SvmLoss::SquaredHinge;
    else throw ContractError("unknown SVM loss '" + loss + "'");

    if (o.penalty == SvmPenalty::L1 && o.loss == SvmLoss::Hinge)
        throw ContractError("SVM: the l1 penalty is only supported with the squared_hinge loss");

    o.C = r.number("C", 1.0);
    o.gamma = r.number("gamma", 0.0);
    o.degree = static_cast<int>(r.number("degree", 3));
    o.coef0 = r.number("coef0", o.kernel == SvmKernel::Sigmoid ? 0.0 : 1.0);
    o.tol = r.number("tol", 1e-4);
    o.max_iter = static_cast<int>(r.number("max_iter", 10000));
    o.seed = seed;
    if (!(o.C > 0.0) || o.gamma < 0.0 || o.degree < 1 || !(o.tol > 0.0) || o.max_iter < 1)
        throw ContractError("SVM: invalid numeric parameter");
    return o;
}

double SvmClassifier::kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                             const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
    switch (opt_.kernel) {
    case SvmKernel::Linear: return a.dot(b);
    case SvmKernel::Polynomial: return std::pow(gamma_ * a.dot(b) + opt_.coef0, opt_.degree);
    case SvmKernel::Sigmoid: return std::tanh(gamma_ * a.dot(b) + opt_.coef0);
    case SvmKernel::Rbf: return std::exp(-gamma_ * (a - b).squaredNorm());
    }
    return 0.0;
}

// Dual coordinate descent (Hsieh et al. style) for the L2-regularized
// hinge / squared hinge loss. The bias enters through an augmented constant
// feature, i.e. the kernel K(a, b) + 1.
SvmClassifier::Machine SvmClassifier::train_dual(const Eigen::MatrixXd& X, const Eigen::VectorXd& s,
                                                 std::uint64_t seed, double& viol) const {
    const auto n = static_cast<std::size_t>(X.rows());
    const bool hinge = opt_.loss == SvmLoss::Hinge;
    const double upper = hinge ? opt_.C : std::numeric_limits<double>::infinity();
    const double diag = hinge ? 0.0 : 0.5 / opt_.C;
    const bool linear = opt_.kernel == SvmKernel::Linear;

    Eigen::MatrixXd K;
    Eigen::VectorXd qdiag(static_cast<Eigen::Index>(n));
    if (linear) {
        qdiag = X.rowwise().squaredNorm().array() + 1.0 + diag;
    } else {
        K.resize(Eigen::Index(n), Eigen::Index(n));
        for (Eigen::Index i = 0; i < Eigen::Index(n); ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                K(i, j) = K(j, i) = kernel(X.row(i), X.row(j)) + 1.0;
        if (opt_.kernel == SvmKernel::Sigmoid) {
            // tanh kernels are indefinite; shift the training spectrum so the dual stays bounded
            const double low = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly)
                                   .eigenvalues()
                                   .minCoeff();
            if (low < 1e-8)
                K.diagonal().array() += 1e-8 - low;
        }
        qdiag = K.diagonal().array() + diag;
    }

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(Eigen::Index(n));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
    double b = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(Eigen::Index(n), -1.0); // kernel path only

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    viol = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opt_.max_iter; ++iter) {
        std::shuffle(order.begin(), order.end(), rng);
        double pg_max = -std::numeric_limits<double>::infinity();
        double pg_min = std::numeric_limits<double>::infinity();
        for (auto i : order) {
            const auto ii = Eigen::Index(i);
            const double G = linear ? s(ii) * (X.row(ii).dot(w) + b) - 1.0 + diag * alpha(ii) : grad(ii);
            double pg = G;
            if (alpha(ii) <= 0.0)
                pg = std::min(G, 0.0);
            else if (alpha(ii) >= upper)
                pg = std::max(G, 0.0);
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (std::abs(pg) < 1e-12 || !(qdiag(ii) > 0.0))
                continue;
            const double old = alpha(ii);
            alpha(ii) = std::clamp(old - G / qdiag(ii), 0.0, upper);
            const double delta = (alpha(ii) - old) * s(ii);
            if (delta == 0.0)
                continue;
            if (linear) {
                w += delta * X.row(ii).transpose();
                b += delta;
            } else {
                grad += delta * (s.array() * K.col(ii).array()).matrix();
                grad(ii) += diag * (alpha(ii) - old);
            }
        }
        viol = pg_max - pg_min;
        if (!std::isfinite(viol))
            throw Error("SVM: dual coordinate descent diverged");
        if (viol < opt_.tol)
            break;
    }

    Machine m;
    if (linear) {
        m.weights = w;
        m.bias = b;
        return m;
    }
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < Eigen::Index(n); ++i)
        if (alpha(i) > 0.0)
            support.push_back(i);
    m.basis.resize(Eigen::Index(support.size()), X.cols());
    m.coef.resize(Eigen::Index(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) {
        m.basis.row(Eigen::Index(j)) = X.row(support[j]);
        m.coef(Eigen::Index(j)) = alpha(support[j]) * s(support[j]);
        m.bias += m.coef(Eigen::Index(j));
    }
    return m;
}

// Primal coordinate descent for min ||v||_1 + C sum max(0, 1 - s_i v.z_i)^2
// with a Newton step and backtracking line search per coordinate. z_i is the
// input row (linear kernel) or the kernel row K(x_i, .) over the training
// set, plus a trailing constant 1 for the bias.
SvmClassifier::Machine SvmClassifier::train_l1(const Eigen::MatrixXd& X, const Eigen::VectorXd& s,
                                               std::uint64_t seed, double& viol) const {
    const auto n = X.rows();
    const bool linear = opt_.kernel == SvmKernel::Linear;
    const Eigen::Index m = (linear ? X.cols() : n) + 1;

    Eigen::MatrixXd Z(n, m);
    if (linear) {
        Z.leftCols(X.cols()) = X;
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j)
                Z(i, j) = Z(j, i) = kernel(X.row(i), X.row(j));
    }
    Z.col(m - 1).setOnes();

    const double C = opt_.C;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd margin = Eigen::VectorXd::Ones(n); // 1 - s_i v.z_i
    Eigen::VectorXd col_sq = Z.colwise().squaredNorm();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    viol = std::numeric_limits<double>::infinity();
    constexpr double sigma = 0.01;
    double initial = 0.0;

    for (int iter = 0; iter < opt_.max_iter; ++iter) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_viol = 0.0;
        for (auto j : order) {
            double G = 0.0, H = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (margin(i) > 0.0) {
                    const double z = Z(i, j);
                    G -= 2.0 * C * s(i) * z * margin(i);
                    H += 2.0 * C * z * z;
                }
            H = std::max(H, 1e-12);
            const double Gp = G + 1.0, Gn = G - 1.0;
            double vj_viol;
            if (v(j) == 0.0)
                vj_viol = Gp < 0.0 ? -Gp : (Gn > 0.0 ? Gn : 0.0);
            else
                vj_viol = v(j) > 0.0 ? std::abs(Gp) : std::abs(Gn);
            max_viol = std::max(max_viol, vj_viol);
            if (vj_viol == 0.0 || col_sq(j) == 0.0)
                continue;

            double d;
            if (Gp < H * v(j))
                d = -Gp / H;
            else if (Gn > H * v(j))
                d = -Gn / H;
            else
                d = -v(j);
            if (std::abs(d) < 1e-14)
                continue;

            const double base = std::abs(v(j));
            const double expected = G * d + std::abs(v(j) + d) - base;
            double old_loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (margin(i) > 0.0)
                    old_loss += margin(i) * margin(i);
            double step = 1.0;
            for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
                const double dd = step * d;
                double new_loss = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double mi = margin(i) - s(i) * Z(i, j) * dd;
                    if (mi > 0.0)
                        new_loss += mi * mi;
                }
                const double change = std::abs(v(j) + dd) - base + C * (new_loss - old_loss);
                if (change <= sigma * step * expected) {
                    v(j) += dd;
                    margin -= dd * (s.array() * Z.col(j).array()).matrix();
                    break;
                }
            }
        }
        if (iter == 0)
            initial = std::max(max_viol, 1.0);
        viol = max_viol / initial;
        if (viol < opt_.tol)
            break;
    }

    Machine out;
    out.bias = v(m - 1);
    if (linear) {
        out.weights = v.head(m - 1);
        return out;
    }
    std::vector<Eigen::Index> used;
    for (Eigen::Index j = 0; j + 1 < m; ++j)
        if (v(j) != 0.0)
            used.push_back(j);
    out.basis.resize(Eigen::Index(used.size()), X.cols());
    out.coef.resize(Eigen::Index(used.size()));
    for (std::size_t k = 0; k < used.size(); ++k) {
        out.basis.row(Eigen::Index(k)) = X.row(used[k]);
        out.coef(Eigen::Index(k)) = v(used[k]);
    }
    return out;
}

void SvmClassifier::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const auto ci = index_classes(y, 2);
    classes_ = ci.classes;

    gamma_ = opt_.gamma;
    if (gamma_ == 0.0) {
        const double mean = X.mean();
        const double var = (X.array() - mean).square().mean();
        gamma_ = 1.0 / (static_cast<double>(X.cols()) * (var > 0.0 ? var : 1.0));
    }

    const std::size_t n_machines = classes_.size() == 2 ? 1 : classes_.size();
    machines_.clear();
    violation_.clear();
    converged_ = true;
    for (std::size_t c = 0; c < n_machines; ++c) {
        // Binary: the larger label is the positive class. Otherwise one-vs-rest.
        const int positive = n_machines == 1 ? 1 : static_cast<int>(c);
        Eigen::VectorXd s(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            s(i) = ci.codes[static_cast<std::size_t>(i)] == positive ? 1.0 : -1.0;
        double viol = 0.0;
        const auto seed = sub_seed(opt_.seed, c);
        machines_.push_back(opt_.penalty == SvmPenalty::L2 ? train_dual(X, s, seed, viol)
                                                           : train_l1(X, s, seed, viol));
        violation_.push_back(viol);
        converged_ = converged_ && viol < opt_.tol;
    }
}

Eigen::MatrixXd SvmClassifier::decision(const Eigen::MatrixXd& X) const {
    if (machines_.empty())
        throw ContractError("SVM: not fitted");
    Eigen::MatrixXd out(X.rows(), Eigen::Index(machines_.size()));
    for (std::size_t c = 0; c < machines_.size(); ++c) {
        const auto& m = machines_[c];
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double f = m.bias;
            if (opt_.kernel == SvmKernel::Linear) {
                if (X.cols() != m.weights.size())
                    throw ContractError("SVM: column count mismatch");
                f += X.row(i).dot(m.weights);
            } else {
                if (m.basis.rows() > 0 && X.cols() != m.basis.cols())
                    throw ContractError("SVM: column count mismatch");
                for (Eigen::Index j = 0; j < m.basis.rows(); ++j)
                    f += m.coef(j) * kernel(m.basis.row(j), X.row(i));
            }
            out(i, Eigen::Index(c)) = f;
        }
    }
    return out;
}

Eigen::VectorXd SvmClassifier::predict(const Eigen::MatrixXd& X) const {
    const auto d = decision(X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (machines_.size() == 1) {
            out(i) = classes_[d(i, 0) > 0.0 ? 1 : 0];
        } else {
            Eigen::Index best = 0;
            d.row(i).maxCoeff(&best);
            out(i) = classes_[static_cast<std::size_t>(best)];
        }
    }
    return out;
}

nlohmann::json SvmClassifier::save() const {
    nlohmann::json machines = nlohmann::json::array();
    for (const auto& m : machines_)
        machines.push_back({{"weights", to_json(m.weights)},
                            {"basis", to_json(m.basis)},
                            {"coef", to_json(m.coef)},
                            {"bias", m.bias}});
    return {{"kernel", kernel_name(opt_.kernel)}, {"gamma", gamma_}, {"classes", classes_},
            {"machines", machines}, {"violation", violation_}, {"converged", converged_}};
}

void SvmClassifier::load(const nlohmann::json& state) {
    gamma_ = state.at("gamma").get<double>();
    classes_ = state.at("classes").get<std::vector<double>>();
    machines_.clear();
    for (const auto& j : state.at("machines")) {
        Machine m;
        m.weights = vector_from_json(j.at("weights"));
        m.basis = matrix_from_json(j.at("basis"));
        m.coef = vector_from_json(j.at("coef"));
        m.bias = j.at("bias").get<double>();
        machines_.push_back(std::move(m));
    }
    violation_ = state.at("violation").get<std::vector<double>>();
    converged_ = state.at("converged").get<bool>();
}

} // namespace bleocc
