#include "spdalign/alignment.hpp"

#include <algorithm>
#include <set>

namespace spdalign {

void SubjectFeatureBlock::validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw InvalidInput("SubjectFeatureBlock " + subject_id + ": rows and labels differ");
    }
}

MatrixXd recenter_with(std::span<const SpdMatrix> covs, const SpdMatrix& reference) {
    if (covs.empty()) throw InvalidInput("recenter: empty covariance list");
    const MatrixXd whitener = matrix_invsqrt(reference).matrix();
    MatrixXd rows(static_cast<Eigen::Index>(covs.size()), tangent_dim(reference.dim()));
    for (std::size_t i = 0; i < covs.size(); ++i) {
        if (covs[i].dim() != reference.dim()) throw DimensionMismatch("recenter: dimension mismatch");
        rows.row(static_cast<Eigen::Index>(i)) = whitened_log(covs[i], whitener).values().transpose();
    }
    return rows;
}

RecenterResult recenter_subject(std::span<const SpdMatrix> covs) {
    SpdMatrix m = log_euclidean_mean(covs);
    MatrixXd rows = recenter_with(covs, m);
    return {std::move(rows), std::move(m)};
}

RescaleResult rescale_block(const MatrixXd& features) {
    if (features.rows() < 1) throw InvalidInput("rescale_block: empty feature block");
    const double scale = features.rowwise().norm().mean();
    if (!(scale > 0.0)) throw InvalidInput("rescale_block: all-zero feature block");
    return {features / scale, scale};
}

MatrixXd class_anchors(const MatrixXd& features, std::span<const int> labels,
                       std::span<const int> classes) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw InvalidInput("class_anchors: rows and labels differ");
    }
    MatrixXd anchors = MatrixXd::Zero(features.cols(), static_cast<Eigen::Index>(classes.size()));
    for (std::size_t k = 0; k < classes.size(); ++k) {
        Eigen::Index count = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == classes[k]) {
                anchors.col(static_cast<Eigen::Index>(k)) +=
                    features.row(static_cast<Eigen::Index>(i)).transpose();
                ++count;
            }
        }
        if (count == 0) {
            throw CalibrationCoverageError("class " + std::to_string(classes[k]) +
                                           " has no samples");
        }
        anchors.col(static_cast<Eigen::Index>(k)) /= static_cast<double>(count);
    }
    return anchors;
}

namespace {

struct ThinQr {
    MatrixXd q;  // d x r
    MatrixXd r;  // r x K
};

ThinQr thin_qr(const MatrixXd& a) {
    const auto rank = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<MatrixXd> qr(a);
    ThinQr out;
    out.q = qr.householderQ() * MatrixXd::Identity(a.rows(), rank);
    out.r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    return out;
}

}  // namespace

RotationModel fit_rotation(const MatrixXd& train_features, std::span<const int> train_labels,
                           const MatrixXd& calib_features, std::span<const int> calib_labels,
                           double variance_threshold) {
    if (train_features.cols() != calib_features.cols()) {
        throw DimensionMismatch("fit_rotation: training and calibration feature dimensions differ");
    }
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
        throw InvalidInput("fit_rotation: variance threshold must lie in (0, 1]");
    }
    std::set<int> class_set(train_labels.begin(), train_labels.end());
    class_set.insert(calib_labels.begin(), calib_labels.end());
    const std::vector<int> classes(class_set.begin(), class_set.end());
    if (classes.empty()) throw CalibrationCoverageError("fit_rotation: no labelled samples");

    MatrixXd a_train;
    MatrixXd a_calib;
    try {
        a_train = class_anchors(train_features, train_labels, classes);
    } catch (const CalibrationCoverageError& e) {
        throw CalibrationCoverageError(std::string("fit_rotation: training set: ") + e.what());
    }
    try {
        a_calib = class_anchors(calib_features, calib_labels, classes);
    } catch (const CalibrationCoverageError& e) {
        throw CalibrationCoverageError(std::string("fit_rotation: calibration set: ") + e.what());
    }

    // C_TC = A_t A_c^T has rank <= min(d, K); factor through thin QRs so the
    // SVD runs on an r x r core instead of d x d.
    const ThinQr qt = thin_qr(a_train);
    const ThinQr qc = thin_qr(a_calib);
    const MatrixXd core = qt.r * qc.r.transpose();
    Eigen::JacobiSVD<MatrixXd> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXd& sv = svd.singularValues();

    const double total = sv.squaredNorm();
    if (!(total > 0.0)) throw NumericalError("fit_rotation: anchor cross-product is zero");
    Eigen::Index n_v = sv.size();
    double cumulative = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        cumulative += sv(k) * sv(k);
        if (cumulative / total >= variance_threshold - 1e-12) {
            n_v = k + 1;
            break;
        }
    }

    RotationModel model;
    model.u = qt.q * svd.matrixU().leftCols(n_v);
    model.v = qc.q * svd.matrixV().leftCols(n_v);
    model.singular_values = sv;
    model.n_v = n_v;
    model.variance_threshold = variance_threshold;
    return model;
}

MatrixXd apply_rotation(const RotationModel& rotation, const MatrixXd& features) {
    if (features.cols() != rotation.dim()) {
        throw DimensionMismatch("apply_rotation: feature dimension " +
                                std::to_string(features.cols()) + " != rotation dimension " +
                                std::to_string(rotation.dim()));
    }
    // rows: (R x)^T = x^T V U^T
    return (features * rotation.v) * rotation.u.transpose();
}

MatrixXd adaptive_m_transform(std::span<const SpdMatrix> covs, std::span<const int> labels) {
    if (covs.size() != labels.size()) throw InvalidInput("align_adaptive_m: covs and labels differ");
    MatrixXd acc;
    std::size_t count = 0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        if (labels[i] != kAdaptive) continue;
        if (count == 0) acc = MatrixXd::Zero(covs[i].dim(), covs[i].dim());
        acc += covs[i].matrix();
        ++count;
    }
    if (count == 0) throw CalibrationCoverageError("align_adaptive_m: no adaptive-class trials");
    return matrix_invsqrt(SpdMatrix(acc / static_cast<double>(count))).matrix();
}

std::vector<SpdMatrix> align_adaptive_m(std::span<const SpdMatrix> covs,
                                        std::span<const int> labels) {
    const MatrixXd w = adaptive_m_transform(covs, labels);
    std::vector<SpdMatrix> out;
    out.reserve(covs.size());
    for (const auto& c : covs) out.push_back(SpdMatrix::trusted(congruence(w, c.matrix())));
    return out;
}

TrialSet align_adaptive_m_trials(const TrialSet& trials, std::span<const SpdMatrix> covs) {
    const MatrixXd w = adaptive_m_transform(covs, trials.labels);
    TrialSet out = trials;
    for (auto& t : out.trials) t = Trial(w * t.data());
    return out;
}

TsAlignedFeatures align_ts_baseline(std::span<const std::vector<SpdMatrix>> train_subjects,
                                    std::span<const SpdMatrix> test_subject) {
    std::vector<SpdMatrix> pooled;
    for (const auto& s : train_subjects) pooled.insert(pooled.end(), s.begin(), s.end());
    SpdMatrix train_ref = log_euclidean_mean(pooled);
    std::vector<MatrixXd> train;
    train.reserve(train_subjects.size());
    for (const auto& s : train_subjects) train.push_back(recenter_with(s, train_ref));
    RecenterResult test = recenter_subject(test_subject);
    return {std::move(train), std::move(test.features), std::move(train_ref),
            std::move(test.reference)};
}

double mean_row_norm_of_mean(const MatrixXd& features) {
    return features.colwise().mean().norm();
}

}  // namespace spdalign
