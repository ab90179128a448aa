#include "spdalign/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include "json.hpp"
#include <set>
#include <sstream>

#include "spdalign/error.hpp"

namespace spdalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "trial store I/O assumes a little-endian host");

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

template <typename T>
T field(const json& j, const char* key, const fs::path& where) {
    if (!j.contains(key)) throw DataError(where.string() + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(where.string() + ": field '" + key + "': " + e.what());
    }
}

void write_floats(const fs::path& path, const std::vector<float>& buf) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<float> read_floats(const fs::path& path, std::size_t expected) {
    std::error_code ec;
    const auto bytes = fs::file_size(path, ec);
    if (ec) throw DataError("cannot stat payload " + path.string());
    if (bytes != expected * sizeof(float)) {
        throw DataError(path.string() + ": payload length mismatch: expected " +
                        std::to_string(expected * sizeof(float)) + " bytes, found " +
                        std::to_string(bytes));
    }
    std::vector<float> buf(expected);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("short read on " + path.string());
    return buf;
}

std::string sanitize(std::string s) {
    for (auto& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return s;
}

}  // namespace

const char* to_string(EventType t) {
    switch (t) {
        case EventType::heel_strike: return "heel_strike";
        case EventType::advance_onset: return "advance_onset";
        case EventType::delay_onset: return "delay_onset";
        case EventType::steady: return "steady";
    }
    return "?";
}

EventType event_type_from_string(const std::string& s) {
    if (s == "heel_strike") return EventType::heel_strike;
    if (s == "advance_onset") return EventType::advance_onset;
    if (s == "delay_onset") return EventType::delay_onset;
    if (s == "steady") return EventType::steady;
    throw DataError("unknown event type '" + s + "'");
}

void ContinuousRecording::validate() const {
    if (static_cast<std::size_t>(data.rows()) != channel_names.size()) {
        throw DataError("recording " + subject_id + ": channel names do not match data rows");
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].sample < 0 || events[i].sample >= data.cols()) {
            throw DataError("recording " + subject_id + ": event index " +
                            std::to_string(events[i].sample) + " outside recording");
        }
        if (i > 0 && events[i].sample <= events[i - 1].sample) {
            throw DataError("recording " + subject_id + ": event indices not strictly increasing");
        }
    }
}

Eigen::Index window_count(Eigen::Index length, Eigen::Index window, Eigen::Index hop) {
    if (window < 1 || hop < 1) throw InvalidInput("window_count: window and hop must be positive");
    if (length < window) return 0;
    return (length - window) / hop + 1;
}

SegmentResult segment_trials(const ContinuousRecording& rec, const std::string& condition,
                             const SegmentOptions& opts) {
    rec.validate();
    EventType onset;
    if (condition == "advance") {
        onset = EventType::advance_onset;
    } else if (condition == "delay") {
        onset = EventType::delay_onset;
    } else {
        throw InvalidInput("segment_trials: condition must be advance or delay");
    }

    SegmentResult out;
    out.trials.subject_id = rec.subject_id;
    out.trials.condition = condition;
    out.trials.channel_names = rec.channel_names;

    auto emit = [&](Eigen::Index s0, Eigen::Index s2, int label) {
        const Eigen::Index begin = s0 - opts.margin;
        const Eigen::Index end = s2 + opts.margin;
        if (begin < 0 || end > rec.samples()) {
            out.warnings.push_back("subject " + rec.subject_id + ": triple starting at sample " +
                                   std::to_string(s0) + " exceeds recording bounds; skipped");
            return;
        }
        const Eigen::Index n = window_count(end - begin, opts.window, opts.hop);
        if (n == 0) {
            out.warnings.push_back("subject " + rec.subject_id + ": triple starting at sample " +
                                   std::to_string(s0) + " shorter than one window; skipped");
            return;
        }
        for (Eigen::Index w = 0; w < n; ++w) {
            out.trials.trials.emplace_back(rec.data.middleCols(begin + w * opts.hop, opts.window));
            out.trials.labels.push_back(label);
        }
    };

    for (std::size_t e = 0; e < rec.events.size(); ++e) {
        if (rec.events[e].type != onset) continue;
        std::vector<Eigen::Index> strikes;
        for (std::size_t k = e + 1; k < rec.events.size(); ++k) {
            if (rec.events[k].type != EventType::heel_strike) break;
            strikes.push_back(rec.events[k].sample);
        }
        const auto m = strikes.size();
        if (m < 3) {
            out.warnings.push_back("subject " + rec.subject_id + ": tempo block at sample " +
                                   std::to_string(rec.events[e].sample) +
                                   " has fewer than 3 heel strikes; skipped");
            continue;
        }
        emit(strikes[0], strikes[2], kAdaptive);
        const std::size_t mid = (m - 3) / 2;
        if (mid >= 3) {
            emit(strikes[mid], strikes[mid + 2], kNonAdaptive);
        } else {
            out.warnings.push_back("subject " + rec.subject_id + ": tempo block at sample " +
                                   std::to_string(rec.events[e].sample) +
                                   " too short for a separate middle triple; skipped");
        }
    }
    return out;
}

void MontageSpec::validate() const {
    if (channels.empty()) throw DataError("montage " + name + ": empty channel list");
    std::set<std::string> seen;
    for (const auto& c : channels) {
        if (!seen.insert(c).second) throw DataError("montage " + name + ": duplicate channel " + c);
    }
}

MontageSpec load_montage(const fs::path& path) {
    const json j = read_json(path);
    MontageSpec spec{field<std::string>(j, "name", path),
                     field<std::vector<std::string>>(j, "channels", path)};
    spec.validate();
    return spec;
}

std::vector<Eigen::Index> montage_indices(const std::vector<std::string>& channel_names,
                                          const MontageSpec& spec) {
    spec.validate();
    std::vector<Eigen::Index> idx;
    std::vector<std::string> missing;
    for (const auto& name : spec.channels) {
        const auto it = std::find(channel_names.begin(), channel_names.end(), name);
        if (it == channel_names.end()) {
            missing.push_back(name);
        } else {
            idx.push_back(static_cast<Eigen::Index>(it - channel_names.begin()));
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ",") + m;
        throw DataError("montage " + spec.name + ": missing channels: " + list);
    }
    return idx;
}

TrialSet subset_montage(const TrialSet& trials, const MontageSpec& spec) {
    const auto idx = montage_indices(trials.channel_names, spec);
    TrialSet out;
    out.subject_id = trials.subject_id;
    out.condition = trials.condition;
    out.labels = trials.labels;
    out.channel_names = spec.channels;
    out.trials.reserve(trials.size());
    for (const auto& t : trials.trials) out.trials.emplace_back(t.data()(idx, Eigen::all));
    return out;
}

StoreManifest read_store_manifest(const fs::path& manifest_path) {
    const json j = read_json(manifest_path);
    StoreManifest m;
    if (field<std::string>(j, "schema", manifest_path) != "spdalign.trialstore") {
        throw DataError(manifest_path.string() + ": not a trial store manifest");
    }
    m.schema_version = field<int>(j, "schema_version", manifest_path);
    if (m.schema_version != kStoreSchemaVersion) {
        throw DataError(manifest_path.string() + ": unknown schema version " +
                        std::to_string(m.schema_version));
    }
    m.dtype = field<std::string>(j, "dtype", manifest_path);
    if (m.dtype != "float32") {
        throw DataError(manifest_path.string() + ": unsupported dtype '" + m.dtype +
                        "' (trial stores are float32)");
    }
    m.byte_order = field<std::string>(j, "byte_order", manifest_path);
    if (m.byte_order != "little") {
        throw DataError(manifest_path.string() + ": unsupported byte order '" + m.byte_order + "'");
    }
    m.subject = field<std::string>(j, "subject", manifest_path);
    m.condition = field<std::string>(j, "condition", manifest_path);
    m.channel_names = field<std::vector<std::string>>(j, "channel_names", manifest_path);
    const json dims = field<json>(j, "dims", manifest_path);
    m.trials = field<std::size_t>(dims, "t", manifest_path);
    m.channels = field<std::size_t>(dims, "e", manifest_path);
    m.samples = field<std::size_t>(dims, "s", manifest_path);
    for (const auto& l : field<std::vector<std::string>>(j, "labels", manifest_path)) {
        m.labels.push_back(label_from_name(l));
    }
    m.payload = field<std::string>(j, "payload", manifest_path);
    if (m.labels.size() != m.trials) {
        throw DataError(manifest_path.string() + ": " + std::to_string(m.labels.size()) +
                        " labels for " + std::to_string(m.trials) + " trials");
    }
    if (m.channel_names.size() != m.channels) {
        throw DataError(manifest_path.string() + ": channel names do not match dims.e");
    }
    return m;
}

void write_store(const fs::path& manifest_path, const TrialSet& trials) {
    trials.validate();
    const std::size_t t = trials.size();
    const auto e = static_cast<std::size_t>(trials.channels());
    const std::size_t s = t > 0 ? static_cast<std::size_t>(trials.trials.front().samples()) : 0;
    std::vector<float> buf;
    buf.reserve(t * e * s);
    for (const auto& tr : trials.trials) {
        if (static_cast<std::size_t>(tr.samples()) != s) {
            throw InvalidInput("write_store: trials differ in sample count");
        }
        for (Eigen::Index c = 0; c < tr.channels(); ++c) {
            for (Eigen::Index k = 0; k < tr.samples(); ++k) buf.push_back(static_cast<float>(tr.data()(c, k)));
        }
    }
    fs::path payload = manifest_path;
    payload.replace_extension(".bin");
    json labels = json::array();
    for (int l : trials.labels) labels.push_back(label_name(l));
    const json j = {{"schema", "spdalign.trialstore"},
                    {"schema_version", kStoreSchemaVersion},
                    {"subject", trials.subject_id},
                    {"condition", trials.condition},
                    {"channel_names", trials.channel_names},
                    {"labels", labels},
                    {"dims", {{"t", t}, {"e", e}, {"s", s}}},
                    {"byte_order", "little"},
                    {"dtype", "float32"},
                    {"layout", "trial,channel,sample"},
                    {"payload", payload.filename().string()}};
    write_floats(payload, buf);
    write_json(manifest_path, j);
}

TrialSet read_store(const fs::path& manifest_path) {
    const StoreManifest m = read_store_manifest(manifest_path);
    const auto buf =
        read_floats(manifest_path.parent_path() / m.payload, m.trials * m.channels * m.samples);
    TrialSet out;
    out.subject_id = m.subject;
    out.condition = m.condition;
    out.channel_names = m.channel_names;
    out.labels = m.labels;
    out.trials.reserve(m.trials);
    const auto e = static_cast<Eigen::Index>(m.channels);
    const auto s = static_cast<Eigen::Index>(m.samples);
    for (std::size_t i = 0; i < m.trials; ++i) {
        Eigen::MatrixXd data(e, s);
        const float* base = buf.data() + i * m.channels * m.samples;
        for (Eigen::Index c = 0; c < e; ++c) {
            for (Eigen::Index k = 0; k < s; ++k) data(c, k) = base[c * s + k];
        }
        out.trials.emplace_back(std::move(data));
    }
    return out;
}

fs::path write_dataset(const fs::path& dir, const std::vector<TrialSet>& subjects) {
    fs::create_directories(dir);
    json stores = json::array();
    for (const auto& s : subjects) {
        const std::string stem = sanitize(s.subject_id) + "_" + sanitize(s.condition);
        write_store(dir / (stem + ".json"), s);
        stores.push_back(stem + ".json");
    }
    const fs::path path = dir / "dataset.json";
    write_json(path, {{"schema", "spdalign.dataset"},
                      {"schema_version", kDatasetSchemaVersion},
                      {"stores", stores}});
    return path;
}

std::vector<fs::path> dataset_store_paths(const fs::path& dataset_json) {
    const json j = read_json(dataset_json);
    if (field<std::string>(j, "schema", dataset_json) != "spdalign.dataset") {
        throw DataError(dataset_json.string() + ": not a dataset manifest");
    }
    if (field<int>(j, "schema_version", dataset_json) != kDatasetSchemaVersion) {
        throw DataError(dataset_json.string() + ": unknown schema version");
    }
    std::vector<fs::path> out;
    for (const auto& s : field<std::vector<std::string>>(j, "stores", dataset_json)) {
        out.push_back(dataset_json.parent_path() / s);
    }
    return out;
}

std::vector<TrialSet> read_dataset(const fs::path& dataset_json,
                                   const std::optional<std::string>& condition) {
    std::vector<TrialSet> out;
    for (const auto& p : dataset_store_paths(dataset_json)) {
        if (condition && read_store_manifest(p).condition != *condition) continue;
        out.push_back(read_store(p));
    }
    return out;
}

std::vector<Event> read_events_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("sample_index,event_type", 0) != 0) {
        throw DataError(path.string() + ": expected header 'sample_index,event_type'");
    }
    std::vector<Event> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed line");
        }
        try {
            out.push_back({std::stoll(line.substr(0, comma)),
                           event_type_from_string(line.substr(comma + 1))});
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad sample index");
        }
    }
    return out;
}

void write_events_csv(const fs::path& path, const std::vector<Event>& events) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "sample_index,event_type\n";
    for (const auto& e : events) out << e.sample << ',' << to_string(e.type) << '\n';
}

void write_recording(const fs::path& manifest_path, const ContinuousRecording& rec) {
    rec.validate();
    fs::path payload = manifest_path;
    payload.replace_extension(".bin");
    fs::path events = manifest_path;
    events.replace_extension(".events.csv");
    std::vector<float> buf;
    buf.reserve(static_cast<std::size_t>(rec.data.size()));
    for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
        for (Eigen::Index k = 0; k < rec.data.cols(); ++k) buf.push_back(static_cast<float>(rec.data(c, k)));
    }
    write_floats(payload, buf);
    write_events_csv(events, rec.events);
    write_json(manifest_path, {{"schema", "spdalign.recording"},
                               {"schema_version", kRecordingSchemaVersion},
                               {"subject", rec.subject_id},
                               {"channel_names", rec.channel_names},
                               {"n_samples", rec.data.cols()},
                               {"byte_order", "little"},
                               {"dtype", "float32"},
                               {"layout", "channel,sample"},
                               {"payload", payload.filename().string()},
                               {"events", events.filename().string()}});
}

ContinuousRecording read_recording(const fs::path& manifest_path) {
    const json j = read_json(manifest_path);
    if (field<std::string>(j, "schema", manifest_path) != "spdalign.recording") {
        throw DataError(manifest_path.string() + ": not a recording manifest");
    }
    if (field<int>(j, "schema_version", manifest_path) != kRecordingSchemaVersion) {
        throw DataError(manifest_path.string() + ": unknown schema version");
    }
    if (field<std::string>(j, "dtype", manifest_path) != "float32") {
        throw DataError(manifest_path.string() + ": unsupported dtype");
    }
    if (field<std::string>(j, "byte_order", manifest_path) != "little") {
        throw DataError(manifest_path.string() + ": unsupported byte order");
    }
    ContinuousRecording rec;
    rec.subject_id = field<std::string>(j, "subject", manifest_path);
    rec.channel_names = field<std::vector<std::string>>(j, "channel_names", manifest_path);
    const auto n = field<std::size_t>(j, "n_samples", manifest_path);
    const auto e = rec.channel_names.size();
    const auto dir = manifest_path.parent_path();
    const auto buf = read_floats(dir / field<std::string>(j, "payload", manifest_path), e * n);
    rec.data.resize(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < e; ++c) {
        for (std::size_t k = 0; k < n; ++k) {
            rec.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = buf[c * n + k];
        }
    }
    rec.events = read_events_csv(dir / field<std::string>(j, "events", manifest_path));
    rec.validate();
    return rec;
}

}  // namespace spdalign
