#pragma once

#include "spdalign/spd.hpp"

namespace spdalign {

/// Mean and orthonormal principal directions (d x k), descending variance.
struct PcaModel {
    VectorXd mean;
    MatrixXd components;
    VectorXd explained_variance;

    Eigen::Index k() const noexcept { return components.cols(); }
    Eigen::Index dim() const noexcept { return components.rows(); }
};

/// round-half-to-even(retain * d).
Eigen::Index retained_count(double retain, Eigen::Index d);

/// Fits k = retained_count(retain, d) components, clamped to [1, min(n-1, d)].
PcaModel fit_pca(const MatrixXd& features, double retain);

/// Fits exactly min(k, n-1, d) components (k >= 1).
PcaModel fit_pca_k(const MatrixXd& features, Eigen::Index k);

/// (X - mean) * components.
MatrixXd pca_transform(const PcaModel& model, const MatrixXd& features);

}  // namespace spdalign
