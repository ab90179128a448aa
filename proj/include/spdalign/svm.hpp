#pragma once

#include <span>

#include "spdalign/spd.hpp"

namespace spdalign {

struct SvmOptions {
    double c = 1.0;
    /// Stop when the maximal KKT violation (m(alpha) - M(alpha)) drops below this.
    double tol = 1e-6;
    /// 0 selects max(10'000'000, 100 n).
    long max_iter = 0;
};

/// Linear soft-margin SVM: sign(w.x + b), label 1 <-> +1, label 0 <-> -1.
struct SvmModel {
    VectorXd weights;
    double bias = 0.0;
    double c = 1.0;
    bool converged = false;
    long iterations = 0;
    double kkt_gap = 0.0;
    Eigen::Index support_vectors = 0;

    VectorXd decision_function(const MatrixXd& x) const;
    std::vector<int> predict(const MatrixXd& x) const;
};

/// Solves the hinge-loss dual with an unregularised bias. An interior-point
/// pass (when d <= 2000) gives a warm start; sequential minimal optimisation
/// with second-order working-set selection, shrinking and Newton polishing on
/// the free set then runs to the KKT tolerance. Deterministic for a given row
/// order. Labels must be 0/1 with both present.
SvmModel train_svm(const MatrixXd& x, std::span<const int> labels, const SvmOptions& opts = {});

/// Column mean/std fitted on training features; zero-variance columns keep std 1.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;

    static Standardizer fit(const MatrixXd& x);
    static Standardizer identity(Eigen::Index dim);
    MatrixXd transform(const MatrixXd& x) const;
};

}  // namespace spdalign
