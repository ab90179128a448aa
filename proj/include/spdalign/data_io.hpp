#pragma once

// Continuous recordings, heel-strike segmentation, montage subsetting and
// the on-disk trial store.
//
// Trial store: a JSON manifest plus a raw little-endian float32 payload laid
// out [trial][channel][sample]. A dataset is a directory with dataset.json
// listing store manifests (one per subject and condition).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spdalign/trial.hpp"

namespace spdalign {

inline constexpr int kStoreSchemaVersion = 1;
inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kRecordingSchemaVersion = 1;

enum class EventType { heel_strike, advance_onset, delay_onset, steady };

const char* to_string(EventType t);
EventType event_type_from_string(const std::string& s);

struct Event {
    Eigen::Index sample;
    EventType type;
};

struct ContinuousRecording {
    std::string subject_id;
    std::vector<std::string> channel_names;
    Eigen::MatrixXd data;  // channels x samples
    std::vector<Event> events;

    Eigen::Index samples() const noexcept { return data.cols(); }
    /// Event indices strictly increasing and inside [0, T).
    void validate() const;
};

struct SegmentOptions {
    Eigen::Index margin = 256;
    Eigen::Index window = 100;
    Eigen::Index hop = 50;
};

/// floor((L - window) / hop) + 1 for L >= window, else 0.
Eigen::Index window_count(Eigen::Index length, Eigen::Index window = 100, Eigen::Index hop = 50);

struct SegmentResult {
    TrialSet trials;
    std::vector<std::string> warnings;
};

/// For each tempo block opened by the condition's onset event, the first
/// three heel strikes form the adaptive triple and the middle three the
/// non-adaptive one. Each triple (S_x, S_x+1, S_x+2) spans
/// [S_x - margin, S_x+2 + margin), cut into windows of `window` samples with
/// hop `hop`. Triples falling outside the recording are skipped with a warning.
SegmentResult segment_trials(const ContinuousRecording& rec, const std::string& condition,
                             const SegmentOptions& opts = {});

struct MontageSpec {
    std::string name;
    std::vector<std::string> channels;

    void validate() const;
};

MontageSpec load_montage(const std::filesystem::path& path);

/// Row indices of `spec` channels in `channel_names`, in spec order.
/// Throws DataError listing every missing name.
std::vector<Eigen::Index> montage_indices(const std::vector<std::string>& channel_names,
                                          const MontageSpec& spec);

TrialSet subset_montage(const TrialSet& trials, const MontageSpec& spec);

struct StoreManifest {
    int schema_version = kStoreSchemaVersion;
    std::string subject;
    std::string condition;
    std::vector<int> labels;
    std::vector<std::string> channel_names;
    std::size_t trials = 0;
    std::size_t channels = 0;
    std::size_t samples = 0;
    std::string byte_order = "little";
    std::string dtype = "float32";
    std::string payload;  // relative to the manifest directory
};

StoreManifest read_store_manifest(const std::filesystem::path& manifest_path);

/// Writes <stem>.json and <stem>.bin next to each other.
void write_store(const std::filesystem::path& manifest_path, const TrialSet& trials);

TrialSet read_store(const std::filesystem::path& manifest_path);

/// Writes one store per subject and dataset.json into `dir`.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<TrialSet>& subjects);

/// Store manifest paths listed by a dataset.json.
std::vector<std::filesystem::path> dataset_store_paths(const std::filesystem::path& dataset_json);

/// Loads every store, optionally keeping only one condition.
std::vector<TrialSet> read_dataset(const std::filesystem::path& dataset_json,
                                   const std::optional<std::string>& condition = std::nullopt);

/// Recording: JSON manifest, float32 payload [channel][sample], events CSV
/// with header `sample_index,event_type`.
void write_recording(const std::filesystem::path& manifest_path, const ContinuousRecording& rec);
ContinuousRecording read_recording(const std::filesystem::path& manifest_path);

std::vector<Event> read_events_csv(const std::filesystem::path& path);
void write_events_csv(const std::filesystem::path& path, const std::vector<Event>& events);

}  // namespace spdalign
