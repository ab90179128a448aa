#include "spdalign/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "spdalign/error.hpp"

namespace spdalign {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
    }
    return m;
}

MatrixXd orthogonal_from(std::mt19937_64& rng, Eigen::Index n) {
    const Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(n, n, rng));
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
    const MatrixXd& r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

/// (I - K)^{-1} (I + K) for skew-symmetric K.
MatrixXd cayley(const MatrixXd& k) {
    const MatrixXd id = MatrixXd::Identity(k.rows(), k.cols());
    return (id - k).partialPivLu().solve(id + k);
}

}  // namespace

void SynthOptions::validate() const {
    if (n_subjects < 1) throw InvalidInput("synth: need at least one subject");
    if (channels < 4) throw InvalidInput("synth: need e >= 4");
    if (trials_per_class < 8) throw InvalidInput("synth: need trials_per_class >= 8");
    if (samples < 2) throw InvalidInput("synth: need s >= 2");
    if (!(shift_strength >= 0.0)) throw InvalidInput("synth: shift_strength must be >= 0");
    if (!(high_variance > 0.0) || !(low_variance > 0.0) || !(noise_sd >= 0.0)) {
        throw InvalidInput("synth: variances must be positive");
    }
}

MatrixXd random_orthogonal(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return orthogonal_from(rng, n);
}

SynthDataset synth_generate(const SynthOptions& opts) {
    opts.validate();
    const Eigen::Index e = opts.channels;
    std::mt19937_64 rng(opts.seed);
    const MatrixXd q0 = orthogonal_from(rng, e);

    SynthDataset out;
    for (int k = 0; k < 2; ++k) out.source_variance[k] = VectorXd::Ones(e);
    out.source_variance[kAdaptive](0) = opts.high_variance;
    out.source_variance[kAdaptive](1) = opts.low_variance;
    out.source_variance[kNonAdaptive](0) = opts.low_variance;
    out.source_variance[kNonAdaptive](1) = opts.high_variance;

    std::vector<std::string> names;
    for (Eigen::Index c = 0; c < e; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "C%02ld", static_cast<long>(c + 1));
        names.emplace_back(buf);
    }

    const double noise_var = opts.noise_sd * opts.noise_sd;
    std::normal_distribution<double> gauss;
    for (std::size_t sub = 0; sub < opts.n_subjects; ++sub) {
        const MatrixXd b = gaussian_matrix(e, e, rng);
        const MatrixXd skew = 0.25 * opts.shift_strength * (b - b.transpose()) / 2.0;
        VectorXd g(e);
        for (Eigen::Index i = 0; i < e; ++i) g(i) = 0.5 * gauss(rng);
        const VectorXd d = (opts.shift_strength * g).array().exp();
        const MatrixXd a = q0 * cayley(skew) * d.asDiagonal();
        out.mixing.push_back(a);

        std::array<MatrixXd, 2> pop;
        for (int k = 0; k < 2; ++k) {
            pop[k] = a * out.source_variance[k].asDiagonal() * a.transpose() +
                     noise_var * MatrixXd::Identity(e, e);
        }
        out.population_covariance.push_back(pop);

        TrialSet ts;
        char id[32];
        std::snprintf(id, sizeof id, "S%02zu", sub + 1);
        ts.subject_id = id;
        ts.condition = opts.condition;
        ts.channel_names = names;
        // Classes interleaved so that any prefix of the trial list is balanced.
        for (std::size_t t = 0; t < 2 * opts.trials_per_class; ++t) {
            const int label = t % 2 == 0 ? kAdaptive : kNonAdaptive;
            const VectorXd sd = out.source_variance[label].cwiseSqrt();
            MatrixXd src = gaussian_matrix(e, opts.samples, rng);
            src = sd.asDiagonal() * src;
            MatrixXd x = a * src + opts.noise_sd * gaussian_matrix(e, opts.samples, rng);
            ts.trials.emplace_back(std::move(x));
            ts.labels.push_back(label);
        }
        out.subjects.push_back(std::move(ts));
    }
    return out;
}

SynthDataset synth_generate(std::size_t n_subjects, std::size_t trials_per_class,
                            Eigen::Index channels, Eigen::Index samples, double shift_strength,
                            std::uint64_t seed) {
    SynthOptions opts;
    opts.n_subjects = n_subjects;
    opts.trials_per_class = trials_per_class;
    opts.channels = channels;
    opts.samples = samples;
    opts.shift_strength = shift_strength;
    opts.seed = seed;
    return synth_generate(opts);
}

std::vector<TrialSet> shuffle_labels(std::vector<TrialSet> subjects, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& s : subjects) {
        // Fisher-Yates with an explicit draw so the permutation does not
        // depend on the standard library's shuffle.
        for (std::size_t i = s.labels.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(s.labels[i - 1], s.labels[j]);
        }
    }
    return subjects;
}

}  // namespace spdalign
