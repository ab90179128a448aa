#include "spdalign/features.hpp"

#include <numeric>

#include "spdalign/alignment.hpp"
#include "spdalign/pca.hpp"

namespace spdalign {

const char* to_string(Fusion f) { return f == Fusion::sequential ? "sequential" : "parallel"; }

const char* to_string(Alignment a) {
    switch (a) {
        case Alignment::none: return "none";
        case Alignment::adaptive_m: return "adaptive_m";
        case Alignment::ts: return "ts";
        case Alignment::itsa: return "itsa";
    }
    return "?";
}

const char* to_string(AdaptiveMTestMode m) {
    return m == AdaptiveMTestMode::calibration_labels ? "calibration_labels" : "skip";
}

Fusion fusion_from_string(const std::string& s) {
    if (s == "sequential") return Fusion::sequential;
    if (s == "parallel") return Fusion::parallel;
    throw ConfigError("fusion: expected one of sequential|parallel, got '" + s + "'");
}

Alignment alignment_from_string(const std::string& s) {
    if (s == "none") return Alignment::none;
    if (s == "adaptive_m") return Alignment::adaptive_m;
    if (s == "ts") return Alignment::ts;
    if (s == "itsa") return Alignment::itsa;
    throw ConfigError("alignment: expected one of none|adaptive_m|ts|itsa, got '" + s + "'");
}

AdaptiveMTestMode adaptive_m_test_from_string(const std::string& s) {
    if (s == "calibration_labels") return AdaptiveMTestMode::calibration_labels;
    if (s == "skip") return AdaptiveMTestMode::skip;
    throw ConfigError("adaptive_m_test: expected one of calibration_labels|skip, got '" + s + "'");
}

void PipelineConfig::validate() const {
    if (pca_retain && !(*pca_retain > 0.0 && *pca_retain <= 1.0)) {
        throw ConfigError("pca_retain: must lie in (0, 1]");
    }
    if (n_filters && *n_filters < 1) throw ConfigError("n_filters: must be >= 1");
    if (!(svm_c > 0.0)) throw ConfigError("svm_c: must be positive");
    if (!(rotation_variance > 0.0 && rotation_variance <= 1.0)) {
        throw ConfigError("rotation_variance: must lie in (0, 1]");
    }
    if (!(frechet.tol > 0.0) || frechet.max_iter < 1) {
        throw ConfigError("frechet: tol must be positive and max_iter >= 1");
    }
    shrinkage.validate();
}

std::vector<Eigen::Index> branch_dims(Fusion fusion, Alignment alignment, Eigen::Index channels,
                                      Eigen::Index filters) {
    if (fusion == Fusion::sequential) return {tangent_dim(filters)};
    if (uses_rotation(alignment)) return {tangent_dim(filters), tangent_dim(channels)};
    return {filters + tangent_dim(channels)};
}

Eigen::Index feature_dim(Fusion fusion, Alignment alignment, Eigen::Index channels,
                         Eigen::Index filters) {
    const auto dims = branch_dims(fusion, alignment, channels, filters);
    return std::accumulate(dims.begin(), dims.end(), Eigen::Index{0});
}

std::vector<Eigen::Index> reduced_dims(Fusion fusion, Alignment alignment, Eigen::Index channels,
                                       Eigen::Index filters, double retain) {
    auto dims = branch_dims(fusion, alignment, channels, filters);
    for (auto& d : dims) d = retained_count(retain, d);
    return dims;
}

void check_cross_montage_feasible(Fusion fusion, Alignment alignment, Eigen::Index train_channels,
                                  Eigen::Index train_filters, Eigen::Index test_channels,
                                  Eigen::Index test_filters, double retain) {
    const auto train = branch_dims(fusion, alignment, train_channels, train_filters);
    const auto test = branch_dims(fusion, alignment, test_channels, test_filters);
    for (std::size_t b = 0; b < train.size(); ++b) {
        const auto k = retained_count(retain, train[b]);
        if (k < 1 || k > test[b]) {
            throw InfeasibleExperiment(
                "cross-montage PCA infeasible: retain " + std::to_string(retain) + " of d_train=" +
                std::to_string(train[b]) + " gives k=" + std::to_string(k) + " but d_test=" +
                std::to_string(test[b]));
        }
    }
}

SubjectCovariances compute_covariances(const TrialSet& trials, const SpatialFilter* filter,
                                       const ShrinkageConfig& shrinkage) {
    SubjectCovariances out;
    out.raw.reserve(trials.size());
    for (const auto& t : trials.trials) out.raw.push_back(shrink(t, shrinkage).cov);
    if (filter != nullptr) {
        out.filtered.reserve(trials.size());
        out.log_variance.resize(static_cast<Eigen::Index>(trials.size()), filter->filters());
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const Trial f = apply_filter(*filter, trials.trials[i]);
            out.log_variance.row(static_cast<Eigen::Index>(i)) =
                log_variance_features(f).transpose();
            out.filtered.push_back(shrink(f, shrinkage).cov);
        }
    }
    return out;
}

MatrixXd tangent_branch(std::span<const SpdMatrix> covs, const SpdMatrix& reference,
                        Alignment alignment) {
    if (uses_rotation(alignment)) return recenter_with(covs, reference);
    MatrixXd rows(static_cast<Eigen::Index>(covs.size()), tangent_dim(reference.dim()));
    for (std::size_t i = 0; i < covs.size(); ++i) {
        rows.row(static_cast<Eigen::Index>(i)) =
            tangent_project(covs[i], reference).values().transpose();
    }
    return rows;
}

namespace {

SpdMatrix resolve_reference(std::span<const SpdMatrix> covs, Alignment alignment,
                            const std::optional<SpdMatrix>& reference, const char* what) {
    if (reference) return *reference;
    if (alignment == Alignment::itsa) return log_euclidean_mean(covs);
    throw InvalidInput(std::string(what) + ": a reference covariance is required for alignment " +
                       to_string(alignment));
}

}  // namespace

MatrixXd features_sequential(const TrialSet& trials, const SpatialFilter& filter,
                             Alignment alignment, const std::optional<SpdMatrix>& reference,
                             const ShrinkageConfig& shrinkage) {
    const SubjectCovariances covs = compute_covariances(trials, &filter, shrinkage);
    const SpdMatrix ref = resolve_reference(covs.filtered, alignment, reference, "features_sequential");
    return tangent_branch(covs.filtered, ref, alignment);
}

MatrixXd features_parallel(const TrialSet& trials, const SpatialFilter& filter,
                           Alignment alignment, const std::optional<SpdMatrix>& filtered_reference,
                           const std::optional<SpdMatrix>& raw_reference,
                           const ShrinkageConfig& shrinkage) {
    const SubjectCovariances covs = compute_covariances(trials, &filter, shrinkage);
    const SpdMatrix raw_ref = resolve_reference(covs.raw, alignment, raw_reference, "features_parallel");
    const MatrixXd raw = tangent_branch(covs.raw, raw_ref, alignment);
    MatrixXd left;
    if (uses_rotation(alignment)) {
        const SpdMatrix f_ref =
            resolve_reference(covs.filtered, alignment, filtered_reference, "features_parallel");
        left = tangent_branch(covs.filtered, f_ref, alignment);
    } else {
        left = covs.log_variance;
    }
    MatrixXd out(left.rows(), left.cols() + raw.cols());
    out << left, raw;
    return out;
}

}  // namespace spdalign
