#pragma once

// Leave-one-subject-out evaluation with a nested two-fold calibration split
// on the held-out subject, plus the ablation, cross-montage and
// learning-curve experiments built on top of it.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spdalign/alignment.hpp"
#include "spdalign/features.hpp"
#include "spdalign/pca.hpp"
#include "spdalign/stats.hpp"
#include "spdalign/trial.hpp"

namespace spdalign {

/// Fitted alignment state for one held-out subject and calibration fold.
struct AlignmentModel {
    std::string alignment;
    std::vector<std::string> subject_ids;          // training subjects, then the held-out one
    std::vector<std::vector<MatrixXd>> references;  // per subject, one reference per branch
    std::vector<double> train_scales;               // per branch
    std::vector<double> test_scales;                // per branch
    RotationModel rotation;
};

struct FoldResult {
    double f1 = 0.0;                 // macro, percent
    std::vector<double> per_class;   // non_adaptive, adaptive
    std::size_t n_calibration = 0;
    std::size_t n_evaluation = 0;
    Eigen::Index n_v = 0;            // rotation rank kept (0 without rotation)
};

struct SubjectResult {
    std::string subject_id;
    double f1 = 0.0;  // mean of the two folds
    std::array<FoldResult, 2> folds;
    std::vector<std::string> training_subjects;
    Eigen::Index train_dim = 0;
    Eigen::Index test_dim = 0;
    bool svm_converged = false;
    /// SHA-256 over the spatial filter and the shrunk raw and filtered
    /// training covariances, i.e. everything upstream of fusion.
    std::string upstream_fingerprint;
    /// SHA-256 over every training-side fitted object (filters, references,
    /// scales, PCA, standardiser, SVM).
    std::string training_fingerprint;
    std::vector<AlignmentModel> alignment_models;  // filled on request
};

struct EvalReport {
    std::string condition;
    PipelineConfig config;
    std::string pipeline_fingerprint;
    std::string dataset_hash;
    std::vector<SubjectResult> subjects;
    Summary summary;
    std::vector<std::string> notes;

    std::vector<double> scores() const;
};

struct EvalOptions {
    std::size_t threads = 1;
    bool keep_alignment_models = false;
    /// Called from worker threads after each held-out subject finishes.
    std::function<void(const SubjectResult&)> on_subject;
};

/// Stratified 50/50 split of `labels`, shuffled with a generator seeded from
/// (seed, subject_id). Returns {fold A, fold B} index lists, each sorted.
std::array<std::vector<std::size_t>, 2> calibration_folds(std::span<const int> labels,
                                                          std::uint64_t seed,
                                                          const std::string& subject_id);

/// Evaluates subject `test` with a model fitted on `train` (indices into
/// `subjects`). The held-out subject is reduced to `cfg.montage` when set.
SubjectResult evaluate_held_out(const std::vector<TrialSet>& subjects, std::size_t test,
                                const std::vector<std::size_t>& train, const PipelineConfig& cfg,
                                const EvalOptions& opts = {});

/// Every subject held out in turn against all the others.
EvalReport run_loso(const std::vector<TrialSet>& subjects, const PipelineConfig& cfg,
                    const EvalOptions& opts = {});

struct ComparisonResult {
    std::string a;
    std::string b;
    std::optional<PairedTests> tests;  // unset when n < 5 or differences are constant
    std::string skipped_reason;
};

struct AblationReport {
    Fusion fusion;
    std::vector<EvalReport> arms;  // none, adaptive_m, ts, itsa
    std::vector<ComparisonResult> comparisons;  // each arm against none
};

AblationReport run_ablation(const std::vector<TrialSet>& subjects, const PipelineConfig& base,
                            const EvalOptions& opts = {}, std::size_t replicates = 100'000);

struct MontageDrop {
    std::string alignment;
    std::vector<double> drops;  // full - reduced, per subject
    Summary summary;
};

struct CrossMontageReport {
    std::vector<std::string> test_montage;
    double retain = 0.0;
    std::vector<Eigen::Index> train_dims;
    std::vector<Eigen::Index> test_dims;
    std::vector<Eigen::Index> reduced_dims;
    std::vector<EvalReport> arms;  // none/full, none/reduced, itsa/full, itsa/reduced
    std::vector<MontageDrop> drops;  // none, itsa
};

/// Full-montage arms run without PCA; reduced arms evaluate the held-out
/// subject on `base.montage` with independent train/test PCA at
/// `base.pca_retain`. Feasibility is checked before any computation.
CrossMontageReport run_cross_montage(const std::vector<TrialSet>& subjects,
                                     const PipelineConfig& base, const EvalOptions& opts = {});

struct CurvePoint {
    std::size_t n_train = 0;
    std::vector<double> fold_scores;  // mean F1 over held-out subjects, per fold
    Summary summary;
};

struct LearningCurveReport {
    std::vector<CurvePoint> points;
    std::optional<CurveFit> fit;  // unset with fewer than 2 distinct sizes
};

/// For each size N and fold r, every held-out subject is trained on N
/// subjects drawn from the remaining pool with a generator seeded from
/// (seed, N, r, subject). N equal to the pool uses the full pool once.
LearningCurveReport run_learning_curve(const std::vector<TrialSet>& subjects,
                                       const PipelineConfig& cfg,
                                       const std::vector<std::size_t>& sizes,
                                       std::size_t folds = 10,
                                       const std::vector<double>& predict_at = {},
                                       const EvalOptions& opts = {});

/// Pre-flight checks on channel names and dimensions only; no numerical work.
void check_experiment_feasible(const std::vector<std::string>& train_channels,
                               const PipelineConfig& cfg);

/// True when `cfg.montage` selects something other than `train_channels`.
bool is_cross_montage(const std::vector<std::string>& train_channels, const PipelineConfig& cfg);

/// SHA-256 over subject ids, conditions, channel names, labels and samples.
std::string dataset_hash(const std::vector<TrialSet>& subjects);

}  // namespace spdalign
