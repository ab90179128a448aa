#include "spdalign/covariance.hpp"

#include <algorithm>

namespace spdalign {

void ShrinkageConfig::validate() const {
    if (gamma && !(*gamma >= 0.0 && *gamma <= 1.0)) {
        throw ConfigError("shrinkage.gamma must lie in [0, 1]");
    }
    if (beta != 0.0) {
        throw ConfigError("shrinkage.beta must be 0 (generic-matrix regularisation is not supported)");
    }
}

MatrixXd trial_covariance(const Trial& trial) {
    const MatrixXd& e = trial.data();
    MatrixXd c = e * e.transpose() / static_cast<double>(e.cols() - 1);
    return 0.5 * (c + c.transpose());
}

double ledoit_wolf_gamma(const Trial& trial) {
    const MatrixXd& e = trial.data();
    const auto p = static_cast<double>(e.rows());
    const auto n = static_cast<double>(e.cols());
    const MatrixXd s = e * e.transpose() / n;
    const double mu = s.trace() / p;
    // d^2 = ||S - mu I||_F^2
    const double d2 = s.squaredNorm() - 2.0 * mu * s.trace() + p * mu * mu;
    // b^2 = (1/n^2) sum_k ||x_k x_k^T - S||_F^2 = (sum_k ||x_k||^4 / n - ||S||_F^2) / n
    const double sum_norm4 = e.colwise().squaredNorm().array().square().sum();
    double b2 = (sum_norm4 / n - s.squaredNorm()) / n;
    b2 = std::clamp(b2, 0.0, std::max(d2, 0.0));
    if (d2 <= 0.0 || b2 == 0.0) return 0.0;
    return std::clamp(b2 / d2, 0.0, 1.0);
}

namespace {

ShrunkCovariance blend(const MatrixXd& c, double gamma, ShrinkageTarget target) {
    const auto e = c.rows();
    const double mu = c.trace() / static_cast<double>(e);
    if (!(mu > 0.0)) throw InvalidInput("shrinkage: degenerate (all-zero) trial");
    const double t = target == ShrinkageTarget::scaled_identity ? mu : 1.0;
    MatrixXd out = (1.0 - gamma) * c;
    out.diagonal().array() += gamma * t;
    return {SpdMatrix(out), gamma};
}

}  // namespace

ShrunkCovariance ledoit_wolf_shrink(const MatrixXd& sample_cov, const Trial& trial,
                                    ShrinkageTarget target) {
    if (sample_cov.rows() != trial.channels() || sample_cov.cols() != trial.channels()) {
        throw DimensionMismatch("ledoit_wolf_shrink: covariance does not match trial");
    }
    const double gamma = ledoit_wolf_gamma(trial);
    try {
        return blend(sample_cov, gamma, target);
    } catch (const InvalidInput&) {
        if (!(sample_cov.trace() > 0.0)) throw;
        return blend(sample_cov, 1.0, target);
    }
}

ShrunkCovariance shrink(const Trial& trial, const ShrinkageConfig& cfg) {
    const MatrixXd c = trial_covariance(trial);
    if (!cfg.gamma) return ledoit_wolf_shrink(c, trial, cfg.target);
    return blend(c, *cfg.gamma, cfg.target);
}

}  // namespace spdalign
