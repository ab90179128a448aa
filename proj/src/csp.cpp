#include "spdalign/csp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spdalign {

namespace {

MatrixXd class_mean(std::span<const SpdMatrix> covs, const char* which) {
    if (covs.empty()) throw InvalidInput(std::string("fit_csp: no ") + which + " covariances");
    const auto dim = covs.front().dim();
    MatrixXd acc = MatrixXd::Zero(dim, dim);
    for (const auto& c : covs) {
        if (c.dim() != dim) throw DimensionMismatch("fit_csp: dimension mismatch");
        acc += c.matrix();
    }
    return acc / static_cast<double>(covs.size());
}

std::vector<Eigen::Index> pairing_order(const VectorXd& lambda) {
    const auto n = lambda.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const double spread = (lambda.array() - 0.5).abs().maxCoeff();
    if (spread < 1e-12) return idx;

    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return lambda(a) > lambda(b); });
    std::vector<Eigen::Index> order;
    order.reserve(idx.size());
    std::size_t lo = 0;
    std::size_t hi = idx.size();
    bool take_top = true;
    while (lo < hi) {
        order.push_back(take_top ? idx[lo++] : idx[--hi]);
        take_top = !take_top;
    }
    return order;
}

}  // namespace

SpatialFilter fit_csp_from_means(const MatrixXd& mean1, const MatrixXd& mean2,
                                 Eigen::Index n_filters) {
    if (mean1.rows() != mean2.rows() || mean1.rows() != mean1.cols()) {
        throw DimensionMismatch("fit_csp: class covariances differ in dimension");
    }
    const auto e = mean1.rows();
    if (n_filters < 1 || n_filters > e) {
        throw InvalidInput("fit_csp: n_filters must lie in [1, " + std::to_string(e) + "]");
    }
    const MatrixXd composite = mean1 + mean2;
    Eigen::LLT<MatrixXd> llt(composite);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("fit_csp: composite covariance C1 + C2 is singular");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(mean1, composite);
    if (ges.info() != Eigen::Success) {
        throw NumericalError("fit_csp: generalized eigenproblem failed");
    }
    const VectorXd& lambda = ges.eigenvalues();
    const MatrixXd& vecs = ges.eigenvectors();
    const auto order = pairing_order(lambda);

    SpatialFilter out{MatrixXd(e, n_filters), VectorXd(n_filters)};
    for (Eigen::Index j = 0; j < n_filters; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        VectorXd w = vecs.col(src);
        Eigen::Index arg = 0;
        w.cwiseAbs().maxCoeff(&arg);
        if (w(arg) < 0.0) w = -w;
        out.weights.col(j) = w;
        out.eigenvalues(j) = lambda(src);
    }
    return out;
}

SpatialFilter fit_csp(std::span<const SpdMatrix> class1, std::span<const SpdMatrix> class2,
                      Eigen::Index n_filters) {
    return fit_csp_from_means(class_mean(class1, "class-1"), class_mean(class2, "class-2"),
                              n_filters);
}

Trial apply_filter(const SpatialFilter& filter, const Trial& trial) {
    if (filter.channels() != trial.channels()) {
        throw DimensionMismatch("apply_filter: filter has " + std::to_string(filter.channels()) +
                                " channels, trial has " + std::to_string(trial.channels()));
    }
    return Trial::filtered(filter.weights.transpose() * trial.data());
}

VectorXd log_variance_features(const Trial& filtered) {
    const MatrixXd& x = filtered.data();
    const VectorXd var = x.rowwise().squaredNorm() / static_cast<double>(x.cols() - 1);
    for (Eigen::Index i = 0; i < var.size(); ++i) {
        if (!(var(i) > 0.0)) {
            throw InvalidInput("log_variance_features: zero variance in row " + std::to_string(i));
        }
    }
    return var.array().log().matrix();
}

double csp_objective(const VectorXd& w, const MatrixXd& c1, const MatrixXd& c2) {
    return w.dot(c1 * w) / w.dot(c2 * w);
}

}  // namespace spdalign
