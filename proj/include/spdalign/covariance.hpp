#pragma once

#include <optional>

#include "spdalign/spd.hpp"
#include "spdalign/trial.hpp"

namespace spdalign {

enum class ShrinkageTarget { scaled_identity, identity };

/// Diagonal loading (1 - gamma) C + gamma T, with T = mu I or I.
///
/// `gamma` unset means Ledoit-Wolf. The generic-matrix transfer term of the
/// RCSP family (beta, s_k, G_k) is kept only as fields; beta must be 0.
struct ShrinkageConfig {
    std::optional<double> gamma;
    ShrinkageTarget target = ShrinkageTarget::scaled_identity;
    double beta = 0.0;
    double scaling = 1.0;

    void validate() const;
};

struct ShrunkCovariance {
    SpdMatrix cov;
    double gamma;
};

/// E E^T / (s - 1), symmetrised. No channel mean is removed.
MatrixXd trial_covariance(const Trial& trial);

/// Ledoit-Wolf intensity for the uncentred samples (columns) of `trial`,
/// clipped to [0, 1].
double ledoit_wolf_gamma(const Trial& trial);

/// Shrinks `sample_cov` (computed from `trial`) with the Ledoit-Wolf
/// intensity toward mu I, mu = trace / e. When the estimated intensity
/// leaves the result singular (all samples share one outer product) the
/// intensity is raised to 1.
ShrunkCovariance ledoit_wolf_shrink(const MatrixXd& sample_cov, const Trial& trial,
                                    ShrinkageTarget target = ShrinkageTarget::scaled_identity);

/// trial_covariance followed by the configured shrinkage.
ShrunkCovariance shrink(const Trial& trial, const ShrinkageConfig& cfg = {});

}  // namespace spdalign
