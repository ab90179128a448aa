#pragma once

// Sequential and parallel fusion of spatial filtering with tangent-space
// features, and the dimension bookkeeping that goes with it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spdalign/covariance.hpp"
#include "spdalign/csp.hpp"
#include "spdalign/spd.hpp"
#include "spdalign/trial.hpp"

namespace spdalign {

enum class Fusion { sequential, parallel };
enum class Alignment { none, adaptive_m, ts, itsa };

/// How the held-out subject is transformed under the Adaptive M baseline.
enum class AdaptiveMTestMode { calibration_labels, skip };

const char* to_string(Fusion f);
const char* to_string(Alignment a);
const char* to_string(AdaptiveMTestMode m);
Fusion fusion_from_string(const std::string& s);
Alignment alignment_from_string(const std::string& s);
AdaptiveMTestMode adaptive_m_test_from_string(const std::string& s);

/// True for the tangent-space alignments (rescale + rotation downstream).
constexpr bool uses_rotation(Alignment a) { return a == Alignment::ts || a == Alignment::itsa; }

struct PipelineConfig {
    Fusion fusion = Fusion::sequential;
    Alignment alignment = Alignment::itsa;
    /// Channel names of the held-out subject's montage; empty means the
    /// training montage.
    std::vector<std::string> montage;
    std::optional<double> pca_retain;
    std::uint64_t seed = 42;
    /// Spatial filters kept; unset keeps all (f = e).
    std::optional<Eigen::Index> n_filters;
    ShrinkageConfig shrinkage;
    bool standardize = true;
    double svm_c = 1.0;
    AdaptiveMTestMode adaptive_m_test = AdaptiveMTestMode::calibration_labels;
    double rotation_variance = 0.999;
    FrechetOptions frechet;

    void validate() const;
};

/// Feature branches, each reduced separately by cross-montage PCA.
/// Sequential: {f(f+1)/2}. Parallel without tangent alignment: one fused
/// branch {f + e(e+1)/2}. Parallel with ts/itsa: {f(f+1)/2, e(e+1)/2}.
std::vector<Eigen::Index> branch_dims(Fusion fusion, Alignment alignment, Eigen::Index channels,
                                      Eigen::Index filters);

Eigen::Index feature_dim(Fusion fusion, Alignment alignment, Eigen::Index channels,
                         Eigen::Index filters);

/// Per-branch PCA sizes for a cross-montage run.
std::vector<Eigen::Index> reduced_dims(Fusion fusion, Alignment alignment, Eigen::Index channels,
                                       Eigen::Index filters, double retain);

/// Throws InfeasibleExperiment when any branch's k exceeds the test branch
/// dimension. Performs no numerical work.
void check_cross_montage_feasible(Fusion fusion, Alignment alignment, Eigen::Index train_channels,
                                  Eigen::Index train_filters, Eigen::Index test_channels,
                                  Eigen::Index test_filters, double retain);

/// Shrunk covariances of a subject's raw and spatially filtered trials.
struct SubjectCovariances {
    std::vector<SpdMatrix> raw;
    std::vector<SpdMatrix> filtered;
    MatrixXd log_variance;  // n x f
};

SubjectCovariances compute_covariances(const TrialSet& trials, const SpatialFilter* filter,
                                       const ShrinkageConfig& shrinkage);

/// Tangent rows for one branch: tangent_project at `reference` without
/// tangent alignment, whitened log (recentring) at `reference` otherwise.
MatrixXd tangent_branch(std::span<const SpdMatrix> covs, const SpdMatrix& reference,
                        Alignment alignment);

/// filter -> shrink -> tangent. `reference` is required for none/adaptive_m
/// and for ts; for itsa an unset reference means the subject's own
/// log-Euclidean mean.
MatrixXd features_sequential(const TrialSet& trials, const SpatialFilter& filter,
                             Alignment alignment, const std::optional<SpdMatrix>& reference,
                             const ShrinkageConfig& shrinkage = {});

/// Without tangent alignment: [log-variance | tangent(raw at raw_reference)].
/// With ts/itsa: [recentred filtered tangent | recentred raw tangent], each
/// branch with its own reference.
MatrixXd features_parallel(const TrialSet& trials, const SpatialFilter& filter,
                           Alignment alignment, const std::optional<SpdMatrix>& filtered_reference,
                           const std::optional<SpdMatrix>& raw_reference,
                           const ShrinkageConfig& shrinkage = {});

}  // namespace spdalign
