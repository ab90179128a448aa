#include "spdalign/pca.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>

namespace spdalign {

Eigen::Index retained_count(double retain, Eigen::Index d) {
    if (!(retain > 0.0 && retain <= 1.0)) throw InvalidInput("PCA retain fraction must lie in (0, 1]");
    const int saved = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double k = std::nearbyint(retain * static_cast<double>(d));
    std::fesetround(saved);
    return static_cast<Eigen::Index>(k);
}

PcaModel fit_pca_k(const MatrixXd& features, Eigen::Index k) {
    const auto n = features.rows();
    const auto d = features.cols();
    if (n < 2) throw InvalidInput("fit_pca: need at least 2 samples");
    k = std::clamp<Eigen::Index>(k, 1, std::min(n - 1, d));

    PcaModel model;
    model.mean = features.colwise().mean().transpose();
    const MatrixXd centred = features.rowwise() - model.mean.transpose();
    Eigen::BDCSVD<MatrixXd> svd(centred, Eigen::ComputeThinV);
    model.components = svd.matrixV().leftCols(k);
    model.explained_variance =
        svd.singularValues().head(k).array().square().matrix() / static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index arg = 0;
        model.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (model.components(arg, j) < 0.0) model.components.col(j) *= -1.0;
    }
    return model;
}

PcaModel fit_pca(const MatrixXd& features, double retain) {
    return fit_pca_k(features, retained_count(retain, features.cols()));
}

MatrixXd pca_transform(const PcaModel& model, const MatrixXd& features) {
    if (features.cols() != model.dim()) {
        throw DimensionMismatch("pca_transform: feature dimension " +
                                std::to_string(features.cols()) + " != model dimension " +
                                std::to_string(model.dim()));
    }
    return (features.rowwise() - model.mean.transpose()) * model.components;
}

}  // namespace spdalign
