#pragma once

// Geometry of symmetric positive definite matrices under the affine-invariant
// metric: spectral matrix functions, distances, means and tangent maps.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "spdalign/error.hpp"

namespace spdalign {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A validated symmetric positive definite matrix (spatial covariance).
///
/// Construction checks finiteness, symmetry (relative Frobenius asymmetry
/// below 1e-10) and strict positivity of the spectrum
/// (lambda_min > dim * eps * lambda_max). The stored matrix is exactly
/// symmetrised.
class SpdMatrix {
public:
    explicit SpdMatrix(const MatrixXd& m);

    /// Wraps a matrix that is SPD by construction (e.g. V exp(D) V^T) without
    /// the eigenvalue check. Still symmetrises.
    static SpdMatrix trusted(const MatrixXd& m);

    static SpdMatrix identity(Eigen::Index dim);

    Eigen::Index dim() const noexcept { return data_.rows(); }
    const MatrixXd& matrix() const noexcept { return data_; }

private:
    struct unchecked_t {};
    SpdMatrix(const MatrixXd& m, unchecked_t);
    MatrixXd data_;
};

/// Half-vectorised symmetric matrix, length e(e+1)/2.
class TangentVector {
public:
    TangentVector(Eigen::Index dim_channels, VectorXd values);

    Eigen::Index dim_channels() const noexcept { return channels_; }
    const VectorXd& values() const noexcept { return values_; }

private:
    Eigen::Index channels_;
    VectorXd values_;
};

/// e(e+1)/2.
constexpr Eigen::Index tangent_dim(Eigen::Index channels) { return channels * (channels + 1) / 2; }

/// Inverse of tangent_dim; throws InvalidInput if n is not triangular.
Eigen::Index channels_for_tangent_dim(Eigen::Index n);

bool is_symmetric(const MatrixXd& m, double rel_tol = 1e-10);

MatrixXd matrix_log(const SpdMatrix& c);
SpdMatrix matrix_exp(const MatrixXd& sym);
SpdMatrix matrix_sqrt(const SpdMatrix& c);
SpdMatrix matrix_invsqrt(const SpdMatrix& c);

/// W C W^T.
MatrixXd congruence(const MatrixXd& w, const MatrixXd& c);

/// Affine-invariant distance sqrt(sum ln^2 lambda) with lambda the
/// generalized eigenvalues of (c2, c1).
double riemannian_distance(const SpdMatrix& c1, const SpdMatrix& c2);

SpdMatrix log_euclidean_mean(std::span<const SpdMatrix> covs);

struct FrechetOptions {
    double tol = 1e-8;
    int max_iter = 50;
};

/// Karcher fixed point started from the log-Euclidean mean.
/// Throws ConvergenceError after max_iter iterations.
SpdMatrix frechet_mean(std::span<const SpdMatrix> covs, const FrechetOptions& opts = {});

/// Upper triangle, row-major, off-diagonals scaled by sqrt(2).
TangentVector half_vectorize(const MatrixXd& sym);
MatrixXd unvectorize(const TangentVector& v);
MatrixXd unvectorize(const VectorXd& v);

/// Log map at c_ref, C_ref^{1/2} logm(C_ref^{-1/2} C C_ref^{-1/2}) C_ref^{1/2},
/// half-vectorised.
TangentVector tangent_project(const SpdMatrix& c, const SpdMatrix& c_ref);

/// Exp map at c_ref; inverse of tangent_project.
SpdMatrix tangent_unproject(const TangentVector& v, const SpdMatrix& c_ref);

/// half_vectorize(logm(W C W)) with W = M^{-1/2} precomputed.
TangentVector whitened_log(const SpdMatrix& c, const MatrixXd& whitener);

}  // namespace spdalign
