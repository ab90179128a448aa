#pragma once

// JSON experiment configuration. Unknown keys and bad values raise
// ConfigError naming the offending field path (e.g. "pipeline.fusion").

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spdalign/data_io.hpp"
#include "spdalign/features.hpp"
#include "spdalign/synth.hpp"

namespace spdalign {

inline constexpr int kConfigSchemaVersion = 1;

struct SynthSection {
    SynthOptions options;
    bool shuffle_labels = false;
};

struct SegmentSection {
    std::vector<std::filesystem::path> recordings;
    std::vector<std::string> conditions{"advance", "delay"};
    SegmentOptions options;
};

struct LearningCurveSection {
    std::vector<std::size_t> sizes{5, 9, 15, 17};
    std::size_t folds = 10;
    std::vector<double> predict_at;
};

struct StatsSection {
    /// Either two report files (scores matched by subject id) or inline scores.
    std::optional<std::filesystem::path> report_a;
    std::optional<std::filesystem::path> report_b;
    std::vector<double> scores_a;
    std::vector<double> scores_b;
};

struct ExperimentConfig {
    std::optional<std::filesystem::path> dataset;
    std::optional<std::string> condition;
    PipelineConfig pipeline;
    /// Montage asset the pipeline.montage names came from, if any.
    std::optional<std::string> montage_name;
    SynthSection synth;
    SegmentSection segment;
    LearningCurveSection learning_curve;
    StatsSection stats;
    std::size_t lilliefors_replicates = 100'000;
    bool save_alignment_models = false;
};

nlohmann::json pipeline_to_json(const PipelineConfig& cfg);

/// `where` prefixes field paths in error messages.
PipelineConfig pipeline_from_json(const nlohmann::json& j, const std::string& where = "pipeline");

/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form of the pipeline configuration.
std::string config_fingerprint(const PipelineConfig& cfg);

}  // namespace spdalign
