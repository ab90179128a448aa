#pragma once

// Seeded synthetic cross-subject data: two latent sources whose variances
// swap between the classes, mixed by a subject-specific matrix.

#include <array>
#include <cstdint>
#include <vector>

#include "spdalign/trial.hpp"

namespace spdalign {

struct SynthOptions {
    std::size_t n_subjects = 8;
    std::size_t trials_per_class = 64;
    Eigen::Index channels = 16;
    Eigen::Index samples = 100;
    double shift_strength = 1.0;
    std::uint64_t seed = 42;
    /// Variances of the two discriminative sources for the adaptive class;
    /// the non-adaptive class swaps them.
    double high_variance = 3.0;
    double low_variance = 1.0;
    double noise_sd = 0.3;
    std::string condition = "advance";

    void validate() const;
};

struct SynthDataset {
    std::vector<TrialSet> subjects;
    /// A_sub = Q0 * cayley(shift * K_sub) * diag(exp(shift * g_sub)).
    std::vector<Eigen::MatrixXd> mixing;
    /// Per subject, population covariance indexed by class label.
    std::vector<std::array<Eigen::MatrixXd, 2>> population_covariance;
    /// Latent source variances per class label.
    std::array<Eigen::VectorXd, 2> source_variance;
    std::array<Eigen::Index, 2> discriminative_sources{0, 1};
};

SynthDataset synth_generate(const SynthOptions& opts);

SynthDataset synth_generate(std::size_t n_subjects, std::size_t trials_per_class,
                            Eigen::Index channels, Eigen::Index samples, double shift_strength,
                            std::uint64_t seed);

/// Random orthogonal matrix (QR of a Gaussian matrix, sign-fixed R diagonal).
Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::uint64_t seed);

/// Permutes labels within each subject with a seeded shuffle.
std::vector<TrialSet> shuffle_labels(std::vector<TrialSet> subjects, std::uint64_t seed);

}  // namespace spdalign
