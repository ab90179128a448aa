#include "spdalign/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>

#include "spdalign/config.hpp"
#include "spdalign/data_io.hpp"
#include "spdalign/error.hpp"
#include "spdalign/eval.hpp"
#include "spdalign/hash.hpp"
#include "spdalign/parallel.hpp"
#include "spdalign/report.hpp"
#include "spdalign/stats.hpp"
#include "spdalign/synth.hpp"

namespace spdalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Logger {
public:
    Logger(std::ostream& out, int verbosity) : out_(out), verbosity_(verbosity) {}

    void info(const std::string& event, json fields = json::object()) {
        if (verbosity_ < 1) return;
        fields["level"] = "info";
        fields["event"] = event;
        const std::lock_guard lock(mu_);
        out_ << fields.dump() << '\n';
    }

    void warn(const std::string& message) {
        if (verbosity_ < 1) return;
        const std::lock_guard lock(mu_);
        out_ << json{{"level", "warning"}, {"event", "warning"}, {"message", message}}.dump() << '\n';
    }

private:
    std::ostream& out_;
    int verbosity_;
    std::mutex mu_;
};

/// Output files of one run, relative to --out.
class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    fs::path path(const std::string& rel) {
        files_.insert(rel);
        const fs::path p = dir_ / rel;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }

    void json_file(const std::string& rel, const json& j) { write_json_file(path(rel), j); }
    void text_file(const std::string& rel, const std::string& text) { write_text_file(path(rel), text); }

    /// Registers files written by other code (e.g. a dataset directory).
    void add_tree(const fs::path& sub) {
        std::vector<std::string> found;
        for (const auto& entry : fs::recursive_directory_iterator(dir_ / sub)) {
            if (entry.is_regular_file()) found.push_back(fs::relative(entry.path(), dir_).generic_string());
        }
        files_.insert(found.begin(), found.end());
    }

    std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

private:
    fs::path dir_;
    std::set<std::string> files_;
};

bool needs_seed(const std::string& command) { return command != "segment"; }

bool needs_dataset(const std::string& command) {
    return command == "run-loso" || command == "ablation" || command == "cross-montage" ||
           command == "learning-curve";
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return kExitConfig;
        case ErrorKind::data:
        case ErrorKind::invalid_input: return kExitData;
        case ErrorKind::numerical: return kExitNumerical;
    }
    return kExitData;
}

const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::invalid_input: return "invalid_input";
        case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

/// Hash of the dataset files: dataset.json, every store manifest and payload.
std::string dataset_files_hash(const fs::path& dataset_json) {
    Sha256 h;
    h.update(sha256_file(dataset_json));
    for (const auto& p : dataset_store_paths(dataset_json)) {
        h.update(sha256_file(p));
        const StoreManifest m = read_store_manifest(p);
        h.update(sha256_file(p.parent_path() / m.payload));
    }
    return h.hex_digest();
}

struct DatasetPlan {
    std::vector<fs::path> stores;
    std::vector<std::string> channel_names;
    std::string condition;
};

/// Manifest-only inspection of the dataset: no sample is read.
DatasetPlan plan_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset) throw ConfigError("dataset: required for this command");
    if (!fs::exists(*cfg.dataset)) throw ConfigError("dataset: file not found: " + cfg.dataset->string());
    DatasetPlan plan;
    std::set<std::string> conditions;
    std::vector<StoreManifest> manifests;
    for (const auto& p : dataset_store_paths(*cfg.dataset)) {
        StoreManifest m = read_store_manifest(p);
        conditions.insert(m.condition);
        if (cfg.condition && m.condition != *cfg.condition) continue;
        plan.stores.push_back(p);
        manifests.push_back(std::move(m));
    }
    if (!cfg.condition && conditions.size() > 1) {
        throw ConfigError("condition: the dataset holds several conditions; choose one");
    }
    if (manifests.size() < 2) {
        throw DataError("dataset: need at least 2 subjects for the selected condition, found " +
                        std::to_string(manifests.size()));
    }
    plan.condition = manifests.front().condition;
    plan.channel_names = manifests.front().channel_names;
    std::set<std::string> ids;
    for (const auto& m : manifests) {
        if (m.channel_names != plan.channel_names) {
            throw DataError("dataset: subject " + m.subject + " has a different channel list");
        }
        if (!ids.insert(m.subject).second) throw DataError("dataset: duplicate subject " + m.subject);
    }
    return plan;
}

std::vector<TrialSet> load_plan(const DatasetPlan& plan) {
    std::vector<TrialSet> out;
    for (const auto& p : plan.stores) out.push_back(read_store(p));
    return out;
}

std::vector<double> report_scores_by_subject(const EvalReport& a, const EvalReport& b,
                                             std::vector<double>& sb,
                                             std::vector<std::string>& ids) {
    std::map<std::string, double> mb;
    for (const auto& s : b.subjects) mb[s.subject_id] = s.f1;
    std::vector<double> sa;
    for (const auto& s : a.subjects) {
        const auto it = mb.find(s.subject_id);
        if (it == mb.end()) throw DataError("stats: subject " + s.subject_id + " missing from report_b");
        sa.push_back(s.f1);
        sb.push_back(it->second);
        ids.push_back(s.subject_id);
    }
    if (sa.size() != b.subjects.size()) throw DataError("stats: reports cover different subjects");
    return sa;
}

int run_command(const CliArgs& args, const ExperimentConfig& cfg, Outputs& out, Logger& log,
                std::size_t threads) {
    EvalOptions opts;
    opts.threads = threads;
    opts.keep_alignment_models = cfg.save_alignment_models;
    opts.on_subject = [&log](const SubjectResult& r) {
        log.info("subject_done", {{"subject", r.subject_id}, {"f1", r.f1}});
    };
    const std::string& c = args.command;

    if (c == "synth") {
        SynthOptions o = cfg.synth.options;
        o.seed = *args.seed;
        SynthDataset ds = synth_generate(o);
        if (cfg.synth.shuffle_labels) ds.subjects = shuffle_labels(std::move(ds.subjects), *args.seed);
        write_dataset(out.path("dataset/dataset.json").parent_path(), ds.subjects);
        out.add_tree("dataset");
        json subjects = json::array();
        for (const auto& s : ds.subjects) {
            subjects.push_back({{"subject", s.subject_id}, {"trials", s.size()}});
        }
        out.json_file("synth.json", {{"schema", "spdalign.synth_report"},
                                     {"schema_version", kReportSchemaVersion},
                                     {"seed", o.seed},
                                     {"n_subjects", o.n_subjects},
                                     {"trials_per_class", o.trials_per_class},
                                     {"channels", o.channels},
                                     {"samples", o.samples},
                                     {"shift_strength", o.shift_strength},
                                     {"shuffle_labels", cfg.synth.shuffle_labels},
                                     {"dataset", "dataset/dataset.json"},
                                     {"dataset_hash", dataset_hash(ds.subjects)},
                                     {"subjects", subjects}});
        return kExitOk;
    }

    if (c == "segment") {
        if (cfg.segment.recordings.empty()) throw ConfigError("segment.recordings: required");
        for (const auto& r : cfg.segment.recordings) {
            if (!fs::exists(r)) throw ConfigError("segment.recordings: file not found: " + r.string());
        }
        std::vector<TrialSet> sets;
        json entries = json::array();
        for (const auto& r : cfg.segment.recordings) {
            const ContinuousRecording rec = read_recording(r);
            for (const auto& cond : cfg.segment.conditions) {
                SegmentResult sr = segment_trials(rec, cond, cfg.segment.options);
                for (const auto& w : sr.warnings) log.warn(w);
                std::size_t n_adaptive = 0;
                for (int l : sr.trials.labels) n_adaptive += l == kAdaptive ? 1 : 0;
                entries.push_back({{"subject", rec.subject_id},
                                   {"condition", cond},
                                   {"trials", sr.trials.size()},
                                   {"adaptive", n_adaptive},
                                   {"non_adaptive", sr.trials.size() - n_adaptive},
                                   {"warnings", sr.warnings}});
                if (sr.trials.size() > 0) sets.push_back(std::move(sr.trials));
            }
        }
        if (sets.empty()) throw DataError("segment: no trials produced");
        write_dataset(out.path("dataset/dataset.json").parent_path(), sets);
        out.add_tree("dataset");
        out.json_file("segment.json", {{"schema", "spdalign.segment_report"},
                                       {"schema_version", kReportSchemaVersion},
                                       {"dataset", "dataset/dataset.json"},
                                       {"recordings", entries}});
        return kExitOk;
    }

    if (c == "stats") {
        std::vector<double> a = cfg.stats.scores_a;
        std::vector<double> b = cfg.stats.scores_b;
        std::vector<std::string> ids;
        if (cfg.stats.report_a) {
            const EvalReport ra = eval_report_from_json(read_json_file(*cfg.stats.report_a));
            const EvalReport rb = eval_report_from_json(read_json_file(*cfg.stats.report_b));
            b.clear();
            a = report_scores_by_subject(ra, rb, b, ids);
        }
        if (a.size() != b.size()) throw ConfigError("stats: scores_a and scores_b differ in length");
        PairedTests t;
        try {
            t = paired_tests(a, b, cfg.lilliefors_replicates, *args.seed);
        } catch (const InvalidInput& e) {
            throw DataError(std::string("stats: ") + e.what());
        }
        out.json_file("stats.json", {{"schema", "spdalign.stats_report"},
                                     {"schema_version", kReportSchemaVersion},
                                     {"seed", *args.seed},
                                     {"replicates", cfg.lilliefors_replicates},
                                     {"subjects", ids},
                                     {"scores_a", a},
                                     {"scores_b", b},
                                     {"summary_a", to_json(summarize(a))},
                                     {"summary_b", to_json(summarize(b))},
                                     {"tests", to_json(t)}});
        return kExitOk;
    }

    // Dataset commands: pre-flight on manifests, then compute.
    PipelineConfig pc = cfg.pipeline;
    pc.seed = *args.seed;
    const DatasetPlan plan = plan_dataset(cfg);
    if (c == "cross-montage") {
        if (pc.montage.empty()) throw ConfigError("montage: required for cross-montage");
        if (!pc.pca_retain) throw ConfigError("pipeline.pca_retain: required for cross-montage");
        for (auto a : {Alignment::none, Alignment::itsa}) {
            PipelineConfig arm = pc;
            arm.alignment = a;
            check_experiment_feasible(plan.channel_names, arm);
        }
    } else if (c == "ablation") {
        for (auto a : {Alignment::none, Alignment::adaptive_m, Alignment::ts, Alignment::itsa}) {
            PipelineConfig arm = pc;
            arm.alignment = a;
            check_experiment_feasible(plan.channel_names, arm);
        }
    } else {
        check_experiment_feasible(plan.channel_names, pc);
    }
    if (c == "learning-curve") {
        for (auto n : cfg.learning_curve.sizes) {
            if (n > plan.stores.size() - 1) {
                throw InfeasibleExperiment("learning_curve.sizes: " + std::to_string(n) +
                                           " exceeds the training pool of " +
                                           std::to_string(plan.stores.size() - 1));
            }
        }
    }
    log.info("preflight_ok", {{"subjects", plan.stores.size()}, {"condition", plan.condition}});
    const std::vector<TrialSet> subjects = load_plan(plan);

    if (c == "run-loso") {
        const EvalReport r = run_loso(subjects, pc, opts);
        out.json_file("report.json", to_json(r));
        out.text_file("scores.csv", scores_csv(r));
        if (cfg.save_alignment_models) {
            for (const auto& s : r.subjects) {
                for (std::size_t k = 0; k < s.alignment_models.size(); ++k) {
                    out.json_file("models/" + s.subject_id + "_fold" + std::to_string(k) + ".json",
                                  to_json(s.alignment_models[k]));
                }
            }
        }
        log.info("summary", {{"mean_f1", r.summary.mean}, {"sd_f1", r.summary.sd}});
    } else if (c == "ablation") {
        const AblationReport r = run_ablation(subjects, pc, opts, cfg.lilliefors_replicates);
        out.json_file("ablation.json", to_json(r));
        out.text_file("ablation.csv", ablation_csv(r));
    } else if (c == "cross-montage") {
        const CrossMontageReport r = run_cross_montage(subjects, pc, opts);
        json j = to_json(r);
        if (cfg.montage_name) j["montage_name"] = *cfg.montage_name;
        out.json_file("cross_montage.json", j);
        out.text_file("cross_montage.csv", cross_montage_csv(r));
    } else if (c == "learning-curve") {
        const LearningCurveReport r =
            run_learning_curve(subjects, pc, cfg.learning_curve.sizes, cfg.learning_curve.folds,
                               cfg.learning_curve.predict_at, opts);
        json j = to_json(r);
        j["config"] = pipeline_to_json(pc);
        j["dataset_hash"] = dataset_hash(subjects);
        out.json_file("learning_curve.json", j);
        out.text_file("learning_curve.csv", learning_curve_csv(r));
        out.text_file("curve_fit.csv", curve_fit_csv(r));
    }
    return kExitOk;
}

}  // namespace

const std::vector<std::string>& cli_commands() {
    static const std::vector<std::string> commands{"segment",       "synth",          "run-loso",
                                                   "ablation",      "cross-montage",  "learning-curve",
                                                   "stats"};
    return commands;
}

int dispatch(const CliArgs& args, std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    Logger log(err, args.verbosity);
    Outputs out(args.out);
    std::string config_hash;
    std::string data_hash;
    int code = kExitOk;
    std::string error_kind;
    std::string error_message;

    auto fail = [&](int c, const std::string& kind, const std::string& msg) {
        code = c;
        error_kind = kind;
        error_message = msg;
        err << json{{"error", kind}, {"message", msg}, {"exit_code", c}}.dump() << '\n';
    };

    try {
        fs::create_directories(args.out);
    } catch (const fs::filesystem_error& e) {
        fail(kExitConfig, "config", std::string("--out: ") + e.what());
        return code;
    }

    try {
        const auto& cmds = cli_commands();
        if (std::find(cmds.begin(), cmds.end(), args.command) == cmds.end()) {
            throw ConfigError("command: unknown command '" + args.command + "'");
        }
        if (!fs::exists(args.config)) throw ConfigError("--config: file not found: " + args.config.string());
        config_hash = sha256_file(args.config);
        if (needs_seed(args.command) && !args.seed) {
            throw ConfigError("--seed: required for command " + args.command);
        }
        const ExperimentConfig cfg = load_experiment_config(args.config);
        if (needs_dataset(args.command)) {
            if (!cfg.dataset) throw ConfigError("dataset: required for command " + args.command);
            if (!fs::exists(*cfg.dataset)) {
                throw ConfigError("dataset: file not found: " + cfg.dataset->string());
            }
            data_hash = dataset_files_hash(*cfg.dataset);
        }
        log.info("start", {{"command", args.command}, {"config_sha256", config_hash}});
        code = run_command(args, cfg, out, log, resolve_threads(args.threads));
    } catch (const Error& e) {
        fail(exit_code_for(e.kind()), kind_name(e.kind()), e.what());
    } catch (const nlohmann::json::exception& e) {
        fail(kExitData, "data", e.what());
    } catch (const fs::filesystem_error& e) {
        fail(kExitData, "data", e.what());
    } catch (const std::bad_alloc&) {
        fail(kExitNumerical, "numerical", "out of memory");
    }

    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        json lock = {{"schema", "spdalign.run_lock"},
                     {"schema_version", kReportSchemaVersion},
                     {"command", args.command},
                     {"config_sha256", config_hash.empty() ? json(nullptr) : json(config_hash)},
                     {"dataset_sha256", data_hash.empty() ? json(nullptr) : json(data_hash)},
                     {"seed", args.seed ? json(*args.seed) : json(nullptr)},
                     {"version", SPDALIGN_VERSION}};
        out.json_file("run.lock", lock);
        const auto files = out.files();
        json manifest = {{"schema", "spdalign.run_manifest"},
                         {"schema_version", kReportSchemaVersion},
                         {"command", args.command},
                         {"exit_code", code},
                         {"outputs", files},
                         {"threads", resolve_threads(args.threads)},
                         {"runtime_seconds", runtime}};
        if (code != kExitOk) manifest["error"] = {{"kind", error_kind}, {"message", error_message}};
        write_json_file(args.out / "manifest.json", manifest);
    } catch (const std::exception& e) {
        if (code == kExitOk) fail(kExitData, "data", std::string("writing run metadata: ") + e.what());
    }
    log.info("done", {{"exit_code", code}, {"runtime_seconds", runtime}});
    return code;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Cross-subject EEG transfer learning with tangent-space alignment"};
    CliArgs args;
    std::uint64_t seed = 0;
    app.add_option("command", args.command, "segment|synth|run-loso|ablation|cross-montage|learning-curve|stats")
        ->required();
    app.add_option("--config", args.config, "Experiment configuration (JSON)")->required();
    app.add_option("--out", args.out, "Output directory")->required();
    auto* seed_opt = app.add_option("--seed", seed, "Random seed");
    app.add_option("--threads", args.threads, "Worker cap (0: all cores)");
    app.add_flag("-v,--verbose", args.verbosity, "JSON-line logs on stderr");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "config"}, {"message", e.what()}, {"exit_code", kExitConfig}}.dump()
                  << '\n';
        return kExitConfig;
    }
    if (seed_opt->count() > 0) args.seed = seed;
    return dispatch(args, std::cerr);
}

}  // namespace spdalign
