#pragma once

#include <span>

#include "spdalign/spd.hpp"
#include "spdalign/trial.hpp"

namespace spdalign {

/// CSP filters as columns of W (channels x filters), normalised so that
/// W^T (C1 + C2) W = I. `eigenvalues(j)` is the class-1 variance share
/// lambda = w^T C1 w / w^T (C1 + C2) w of column j.
struct SpatialFilter {
    MatrixXd weights;
    VectorXd eigenvalues;

    Eigen::Index channels() const noexcept { return weights.rows(); }
    Eigen::Index filters() const noexcept { return weights.cols(); }
};

/// Solves C1 w = lambda (C1 + C2) w on the arithmetic class averages and
/// keeps `n_filters` eigenpairs, alternating between the largest and the
/// smallest remaining lambda. A flat spectrum (all lambda = 0.5) keeps the
/// solver's index order. Each filter's largest-magnitude entry is positive.
SpatialFilter fit_csp(std::span<const SpdMatrix> class1, std::span<const SpdMatrix> class2,
                      Eigen::Index n_filters);

/// Same as fit_csp with the class averages given directly.
SpatialFilter fit_csp_from_means(const MatrixXd& mean1, const MatrixXd& mean2,
                                 Eigen::Index n_filters);

/// W^T E.
Trial apply_filter(const SpatialFilter& filter, const Trial& trial);

/// ln of each row's second moment with 1/(s-1) normalisation.
VectorXd log_variance_features(const Trial& filtered);

/// Rayleigh quotient w^T A w / w^T B w.
double csp_objective(const VectorXd& w, const MatrixXd& c1, const MatrixXd& c2);

}  // namespace spdalign
