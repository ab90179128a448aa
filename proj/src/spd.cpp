#include "spdalign/spd.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace spdalign {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

void require_finite(const MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw InvalidInput(std::string(what) + ": non-finite entries");
    }
}

Eigen::SelfAdjointEigenSolver<MatrixXd> eigh(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw NumericalError("symmetric eigendecomposition failed");
    }
    return es;
}

template <typename F>
MatrixXd spectral(const Eigen::SelfAdjointEigenSolver<MatrixXd>& es, F f) {
    const VectorXd mapped = es.eigenvalues().unaryExpr(f);
    const MatrixXd& v = es.eigenvectors();
    MatrixXd out = v * mapped.asDiagonal() * v.transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace

SpdMatrix::SpdMatrix(const MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw InvalidInput("SpdMatrix: matrix must be square and non-empty");
    }
    require_finite(m, "SpdMatrix");
    if (!is_symmetric(m)) {
        throw InvalidInput("SpdMatrix: matrix is not symmetric");
    }
    data_ = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(data_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericalError("SpdMatrix: eigenvalue computation failed");
    }
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const double floor =
        static_cast<double>(data_.rows()) * std::numeric_limits<double>::epsilon() * lmax;
    if (!(lmax > 0.0) || !(lmin > floor)) {
        std::ostringstream os;
        os << "SpdMatrix: not positive definite (lambda_min=" << lmin << ", lambda_max=" << lmax
           << ")";
        throw InvalidInput(os.str());
    }
}

SpdMatrix::SpdMatrix(const MatrixXd& m, unchecked_t) : data_(0.5 * (m + m.transpose())) {}

SpdMatrix SpdMatrix::trusted(const MatrixXd& m) { return SpdMatrix(m, unchecked_t{}); }

SpdMatrix SpdMatrix::identity(Eigen::Index dim) {
    return SpdMatrix(MatrixXd::Identity(dim, dim), unchecked_t{});
}

TangentVector::TangentVector(Eigen::Index dim_channels, VectorXd values)
    : channels_(dim_channels), values_(std::move(values)) {
    if (values_.size() != tangent_dim(channels_)) {
        throw DimensionMismatch("TangentVector: length must be e(e+1)/2");
    }
}

Eigen::Index channels_for_tangent_dim(Eigen::Index n) {
    const auto e = static_cast<Eigen::Index>(
        std::llround((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0));
    if (n <= 0 || tangent_dim(e) != n) {
        throw InvalidInput("length " + std::to_string(n) + " is not of the form e(e+1)/2");
    }
    return e;
}

bool is_symmetric(const MatrixXd& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = m.norm();
    return (m - m.transpose()).norm() <= rel_tol * (scale > 0.0 ? scale : 1.0);
}

MatrixXd matrix_log(const SpdMatrix& c) {
    require_finite(c.matrix(), "matrix_log");
    return spectral(eigh(c.matrix()), [](double x) { return std::log(x); });
}

SpdMatrix matrix_exp(const MatrixXd& sym) {
    if (sym.rows() != sym.cols()) throw InvalidInput("matrix_exp: matrix must be square");
    require_finite(sym, "matrix_exp");
    if (!is_symmetric(sym)) throw InvalidInput("matrix_exp: matrix is not symmetric");
    const MatrixXd s = 0.5 * (sym + sym.transpose());
    return SpdMatrix::trusted(spectral(eigh(s), [](double x) { return std::exp(x); }));
}

SpdMatrix matrix_sqrt(const SpdMatrix& c) {
    return SpdMatrix::trusted(spectral(eigh(c.matrix()), [](double x) { return std::sqrt(x); }));
}

SpdMatrix matrix_invsqrt(const SpdMatrix& c) {
    return SpdMatrix::trusted(
        spectral(eigh(c.matrix()), [](double x) { return 1.0 / std::sqrt(x); }));
}

MatrixXd congruence(const MatrixXd& w, const MatrixXd& c) {
    MatrixXd out = w * c * w.transpose();
    return 0.5 * (out + out.transpose());
}

double riemannian_distance(const SpdMatrix& c1, const SpdMatrix& c2) {
    if (c1.dim() != c2.dim()) throw DimensionMismatch("riemannian_distance: dimension mismatch");
    // Eigenvalues of C1^{-1} C2 solve C2 x = lambda C1 x; Eigen reduces this
    // through the Cholesky factor of C1.
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(c2.matrix(), c1.matrix(),
                                                           Eigen::EigenvaluesOnly);
    if (ges.info() != Eigen::Success) {
        throw NumericalError("riemannian_distance: generalized eigenproblem failed");
    }
    double acc = 0.0;
    for (double l : ges.eigenvalues()) {
        const double ln = std::log(l);
        acc += ln * ln;
    }
    return std::sqrt(acc);
}

SpdMatrix log_euclidean_mean(std::span<const SpdMatrix> covs) {
    if (covs.empty()) throw InvalidInput("log_euclidean_mean: empty list");
    const auto dim = covs.front().dim();
    MatrixXd acc = MatrixXd::Zero(dim, dim);
    for (const auto& c : covs) {
        if (c.dim() != dim) throw DimensionMismatch("log_euclidean_mean: dimension mismatch");
        acc += matrix_log(c);
    }
    acc /= static_cast<double>(covs.size());
    return matrix_exp(acc);
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> covs, const FrechetOptions& opts) {
    if (!(opts.tol > 0.0)) throw InvalidInput("frechet_mean: tol must be positive");
    SpdMatrix m = log_euclidean_mean(covs);
    const auto dim = m.dim();
    double residual = 0.0;
    for (int it = 0; it < opts.max_iter; ++it) {
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es = eigh(m.matrix());
        const MatrixXd sq = spectral(es, [](double x) { return std::sqrt(x); });
        const MatrixXd isq = spectral(es, [](double x) { return 1.0 / std::sqrt(x); });
        MatrixXd step = MatrixXd::Zero(dim, dim);
        for (const auto& c : covs) {
            step += matrix_log(SpdMatrix::trusted(congruence(isq, c.matrix())));
        }
        step /= static_cast<double>(covs.size());
        residual = step.norm();
        m = SpdMatrix::trusted(congruence(sq, matrix_exp(step).matrix()));
        if (residual < opts.tol) return m;
    }
    throw ConvergenceError("frechet_mean: no convergence after " + std::to_string(opts.max_iter) +
                               " iterations",
                           m.matrix(), residual);
}

TangentVector half_vectorize(const MatrixXd& sym) {
    if (sym.rows() != sym.cols()) throw InvalidInput("half_vectorize: matrix must be square");
    const auto e = sym.rows();
    VectorXd v(tangent_dim(e));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < e; ++i) {
        v(k++) = sym(i, i);
        for (Eigen::Index j = i + 1; j < e; ++j) v(k++) = kSqrt2 * sym(i, j);
    }
    return TangentVector(e, std::move(v));
}

MatrixXd unvectorize(const VectorXd& v) {
    const auto e = channels_for_tangent_dim(v.size());
    MatrixXd m(e, e);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < e; ++i) {
        m(i, i) = v(k++);
        for (Eigen::Index j = i + 1; j < e; ++j) {
            m(i, j) = m(j, i) = v(k++) / kSqrt2;
        }
    }
    return m;
}

MatrixXd unvectorize(const TangentVector& v) { return unvectorize(v.values()); }

TangentVector tangent_project(const SpdMatrix& c, const SpdMatrix& c_ref) {
    if (c.dim() != c_ref.dim()) throw DimensionMismatch("tangent_project: dimension mismatch");
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es = eigh(c_ref.matrix());
    const MatrixXd sq = spectral(es, [](double x) { return std::sqrt(x); });
    const MatrixXd isq = spectral(es, [](double x) { return 1.0 / std::sqrt(x); });
    const MatrixXd inner = matrix_log(SpdMatrix::trusted(congruence(isq, c.matrix())));
    return half_vectorize(congruence(sq, inner));
}

SpdMatrix tangent_unproject(const TangentVector& v, const SpdMatrix& c_ref) {
    if (v.dim_channels() != c_ref.dim()) {
        throw DimensionMismatch("tangent_unproject: dimension mismatch");
    }
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es = eigh(c_ref.matrix());
    const MatrixXd sq = spectral(es, [](double x) { return std::sqrt(x); });
    const MatrixXd isq = spectral(es, [](double x) { return 1.0 / std::sqrt(x); });
    const SpdMatrix inner = matrix_exp(congruence(isq, unvectorize(v)));
    return SpdMatrix::trusted(congruence(sq, inner.matrix()));
}

TangentVector whitened_log(const SpdMatrix& c, const MatrixXd& whitener) {
    if (whitener.rows() != c.dim()) throw DimensionMismatch("whitened_log: dimension mismatch");
    return half_vectorize(matrix_log(SpdMatrix::trusted(congruence(whitener, c.matrix()))));
}

}  // namespace spdalign
