#pragma once

// Pre-alignment of per-subject covariance sets and tangent features:
// individual recentring, rescaling to unit mean norm, and a supervised
// rotation fitted from class anchors of a calibration subset. Also the two
// ablation baselines (Euclidean "Adaptive M" recentring and pooled "TS").

#include <span>
#include <string>
#include <vector>

#include "spdalign/spd.hpp"
#include "spdalign/trial.hpp"

namespace spdalign {

/// Feature rows (one per trial) with their labels.
struct SubjectFeatureBlock {
    std::string subject_id;
    std::string condition;
    MatrixXd features;
    std::vector<int> labels;

    void validate() const;
};

struct RecenterResult {
    MatrixXd features;  // n x e(e+1)/2
    SpdMatrix reference;
};

/// M = log-Euclidean mean of `covs`; rows are half_vectorize(logm(M^-1/2 C M^-1/2)).
RecenterResult recenter_subject(std::span<const SpdMatrix> covs);

/// Rows half_vectorize(logm(M^-1/2 C M^-1/2)) for a given reference M.
MatrixXd recenter_with(std::span<const SpdMatrix> covs, const SpdMatrix& reference);

struct RescaleResult {
    MatrixXd features;
    double scale;  // mean row norm before rescaling
};

/// Divides every row by the mean Euclidean row norm.
RescaleResult rescale_block(const MatrixXd& features);

/// R = U~ V~^T, stored factored (R x = U~ (V~^T x)).
struct RotationModel {
    MatrixXd u;                // d x N_v
    MatrixXd v;                // d x N_v
    VectorXd singular_values;  // all nonzero-rank singular values, descending
    Eigen::Index n_v = 0;
    double variance_threshold = 0.999;

    Eigen::Index dim() const noexcept { return u.rows(); }
    MatrixXd matrix() const { return u * v.transpose(); }
};

/// Class means as columns (d x K), classes 0..K-1 taken from `classes`.
MatrixXd class_anchors(const MatrixXd& features, std::span<const int> labels,
                       std::span<const int> classes);

/// Fits R from the cross-product of training and calibration anchors,
/// keeping the fewest singular directions whose squared singular values
/// reach `variance_threshold` of the total. Throws CalibrationCoverageError
/// when a class is absent from either set.
RotationModel fit_rotation(const MatrixXd& train_features, std::span<const int> train_labels,
                           const MatrixXd& calib_features, std::span<const int> calib_labels,
                           double variance_threshold = 0.999);

/// Maps each row v to R v.
MatrixXd apply_rotation(const RotationModel& rotation, const MatrixXd& features);

/// Inverse square root of the arithmetic mean of the adaptive-class covariances.
MatrixXd adaptive_m_transform(std::span<const SpdMatrix> covs, std::span<const int> labels);

/// C -> R^-1/2 C R^-1/2 with R the adaptive-class arithmetic mean.
std::vector<SpdMatrix> align_adaptive_m(std::span<const SpdMatrix> covs,
                                        std::span<const int> labels);

/// E -> R^-1/2 E for every trial.
TrialSet align_adaptive_m_trials(const TrialSet& trials, std::span<const SpdMatrix> covs);

struct TsAlignedFeatures {
    std::vector<MatrixXd> train;  // recentred at the pooled training mean, one block per subject
    MatrixXd test;                // recentred at the test subject's own mean
    SpdMatrix train_reference;
    SpdMatrix test_reference;
};

/// Recentring step of the pooled "TS" baseline: every training subject shares
/// the log-Euclidean mean of the pooled training covariances.
TsAlignedFeatures align_ts_baseline(std::span<const std::vector<SpdMatrix>> train_subjects,
                                    std::span<const SpdMatrix> test_subject);

/// Norm of the mean row of a feature block (tangent-centring error).
double mean_row_norm_of_mean(const MatrixXd& features);

}  // namespace spdalign
