#include "spdalign/config.hpp"

#include <fstream>
#include <set>

#include "spdalign/error.hpp"
#include "spdalign/hash.hpp"

namespace spdalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Typed access to one JSON object; rejects keys that were never asked for.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    std::string path(const std::string& key) const {
        return where_.empty() ? key : where_ + "." + key;
    }

    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    template <typename T>
    T get(const std::string& key) {
        if (!has(key)) throw ConfigError(path(key) + ": required field missing");
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(path(key) + ": required field missing");
        return j_.at(key);
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!known_.contains(item.key())) throw ConfigError(path(item.key()) + ": unknown field");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> known_;
};

template <typename T, typename F>
T rethrow_with_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        // Enum parsers report "<field>: ..."; swap in the full path.
        const auto colon = msg.find(": ");
        throw ConfigError(path + (colon == std::string::npos ? ": " + msg : msg.substr(colon)));
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

json pipeline_to_json(const PipelineConfig& cfg) {
    json shrinkage = {
        {"gamma", cfg.shrinkage.gamma ? json(*cfg.shrinkage.gamma) : json("auto")},
        {"target", cfg.shrinkage.target == ShrinkageTarget::scaled_identity ? "scaled_identity"
                                                                            : "identity"},
        {"beta", cfg.shrinkage.beta},
        {"scaling", cfg.shrinkage.scaling}};
    return {{"fusion", to_string(cfg.fusion)},
            {"alignment", to_string(cfg.alignment)},
            {"montage", cfg.montage},
            {"pca_retain", cfg.pca_retain ? json(*cfg.pca_retain) : json(nullptr)},
            {"seed", cfg.seed},
            {"n_filters", cfg.n_filters ? json(*cfg.n_filters) : json(nullptr)},
            {"shrinkage", shrinkage},
            {"standardize", cfg.standardize},
            {"svm_c", cfg.svm_c},
            {"adaptive_m_test", to_string(cfg.adaptive_m_test)},
            {"rotation_variance", cfg.rotation_variance},
            {"frechet", {{"tol", cfg.frechet.tol}, {"max_iter", cfg.frechet.max_iter}}}};
}

PipelineConfig pipeline_from_json(const json& j, const std::string& where) {
    Section s(j, where);
    PipelineConfig cfg;
    if (s.has("fusion")) {
        const auto v = s.get<std::string>("fusion");
        cfg.fusion = rethrow_with_path<Fusion>(s.path("fusion"), [&] { return fusion_from_string(v); });
    }
    if (s.has("alignment")) {
        const auto v = s.get<std::string>("alignment");
        cfg.alignment =
            rethrow_with_path<Alignment>(s.path("alignment"), [&] { return alignment_from_string(v); });
    }
    if (s.has("montage")) cfg.montage = s.get<std::vector<std::string>>("montage");
    if (s.has("pca_retain")) cfg.pca_retain = s.get<double>("pca_retain");
    if (s.has("seed")) cfg.seed = s.get<std::uint64_t>("seed");
    if (s.has("n_filters")) cfg.n_filters = s.get<Eigen::Index>("n_filters");
    if (s.has("shrinkage")) {
        Section sh(s.raw("shrinkage"), s.path("shrinkage"));
        if (sh.has("gamma")) {
            const json& g = sh.raw("gamma");
            if (g.is_string()) {
                if (g.get<std::string>() != "auto") {
                    throw ConfigError(sh.path("gamma") + ": expected a number in [0,1] or \"auto\"");
                }
            } else {
                cfg.shrinkage.gamma = sh.get<double>("gamma");
            }
        }
        if (sh.has("target")) {
            const auto t = sh.get<std::string>("target");
            if (t == "scaled_identity" || t == "scaled-identity") {
                cfg.shrinkage.target = ShrinkageTarget::scaled_identity;
            } else if (t == "identity") {
                cfg.shrinkage.target = ShrinkageTarget::identity;
            } else {
                throw ConfigError(sh.path("target") + ": expected identity|scaled_identity");
            }
        }
        cfg.shrinkage.beta = sh.get_or<double>("beta", 0.0);
        cfg.shrinkage.scaling = sh.get_or<double>("scaling", 1.0);
        sh.finish();
    }
    cfg.standardize = s.get_or<bool>("standardize", cfg.standardize);
    cfg.svm_c = s.get_or<double>("svm_c", cfg.svm_c);
    if (s.has("adaptive_m_test")) {
        const auto v = s.get<std::string>("adaptive_m_test");
        cfg.adaptive_m_test = rethrow_with_path<AdaptiveMTestMode>(
            s.path("adaptive_m_test"), [&] { return adaptive_m_test_from_string(v); });
    }
    cfg.rotation_variance = s.get_or<double>("rotation_variance", cfg.rotation_variance);
    if (s.has("frechet")) {
        Section fr(s.raw("frechet"), s.path("frechet"));
        cfg.frechet.tol = fr.get_or<double>("tol", cfg.frechet.tol);
        cfg.frechet.max_iter = fr.get_or<int>("max_iter", cfg.frechet.max_iter);
        fr.finish();
    }
    s.finish();
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(where + "." + e.what());
    }
    return cfg;
}

ExperimentConfig parse_experiment_config(const json& j, const fs::path& base_dir) {
    Section s(j, "");
    ExperimentConfig cfg;
    const int version = s.get_or<int>("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
        throw ConfigError("schema_version: unsupported version " + std::to_string(version));
    }
    if (s.has("dataset")) cfg.dataset = resolve(base_dir, s.get<std::string>("dataset"));
    if (s.has("condition")) {
        cfg.condition = s.get<std::string>("condition");
        if (*cfg.condition != "advance" && *cfg.condition != "delay") {
            throw ConfigError("condition: expected advance|delay");
        }
    }
    if (s.has("pipeline")) cfg.pipeline = pipeline_from_json(s.raw("pipeline"), "pipeline");
    if (s.has("montage")) {
        // A montage asset file; its names become pipeline.montage.
        if (!cfg.pipeline.montage.empty()) {
            throw ConfigError("montage: conflicts with pipeline.montage");
        }
        const fs::path p = resolve(base_dir, s.get<std::string>("montage"));
        if (!fs::exists(p)) throw ConfigError("montage: file not found: " + p.string());
        MontageSpec spec;
        try {
            spec = load_montage(p);
        } catch (const DataError& e) {
            throw ConfigError(std::string("montage: ") + e.what());
        }
        cfg.pipeline.montage = spec.channels;
        cfg.montage_name = spec.name;
    }
    if (s.has("synth")) {
        Section sy(s.raw("synth"), "synth");
        auto& o = cfg.synth.options;
        o.n_subjects = sy.get_or<std::size_t>("n_subjects", o.n_subjects);
        o.trials_per_class = sy.get_or<std::size_t>("trials_per_class", o.trials_per_class);
        o.channels = sy.get_or<Eigen::Index>("channels", o.channels);
        o.samples = sy.get_or<Eigen::Index>("samples", o.samples);
        o.shift_strength = sy.get_or<double>("shift_strength", o.shift_strength);
        o.high_variance = sy.get_or<double>("high_variance", o.high_variance);
        o.low_variance = sy.get_or<double>("low_variance", o.low_variance);
        o.noise_sd = sy.get_or<double>("noise_sd", o.noise_sd);
        o.condition = sy.get_or<std::string>("condition", o.condition);
        cfg.synth.shuffle_labels = sy.get_or<bool>("shuffle_labels", false);
        sy.finish();
        try {
            o.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("synth: ") + e.what());
        }
    }
    if (s.has("segment")) {
        Section sg(s.raw("segment"), "segment");
        for (const auto& r : sg.get<std::vector<std::string>>("recordings")) {
            cfg.segment.recordings.push_back(resolve(base_dir, r));
        }
        if (sg.has("conditions")) cfg.segment.conditions = sg.get<std::vector<std::string>>("conditions");
        for (const auto& c : cfg.segment.conditions) {
            if (c != "advance" && c != "delay") throw ConfigError("segment.conditions: expected advance|delay");
        }
        auto& o = cfg.segment.options;
        o.margin = sg.get_or<Eigen::Index>("margin", o.margin);
        o.window = sg.get_or<Eigen::Index>("window", o.window);
        o.hop = sg.get_or<Eigen::Index>("hop", o.hop);
        if (o.margin < 0 || o.window < 2 || o.hop < 1) {
            throw ConfigError("segment: margin >= 0, window >= 2 and hop >= 1 required");
        }
        sg.finish();
    }
    if (s.has("learning_curve")) {
        Section lc(s.raw("learning_curve"), "learning_curve");
        if (lc.has("sizes")) cfg.learning_curve.sizes = lc.get<std::vector<std::size_t>>("sizes");
        cfg.learning_curve.folds = lc.get_or<std::size_t>("folds", cfg.learning_curve.folds);
        if (lc.has("predict_at")) cfg.learning_curve.predict_at = lc.get<std::vector<double>>("predict_at");
        if (cfg.learning_curve.sizes.empty()) throw ConfigError("learning_curve.sizes: must not be empty");
        for (auto n : cfg.learning_curve.sizes) {
            if (n < 1) throw ConfigError("learning_curve.sizes: sizes must be >= 1");
        }
        if (cfg.learning_curve.folds < 1) throw ConfigError("learning_curve.folds: must be >= 1");
        lc.finish();
    }
    if (s.has("stats")) {
        Section st(s.raw("stats"), "stats");
        if (st.has("report_a")) cfg.stats.report_a = resolve(base_dir, st.get<std::string>("report_a"));
        if (st.has("report_b")) cfg.stats.report_b = resolve(base_dir, st.get<std::string>("report_b"));
        if (st.has("scores_a")) cfg.stats.scores_a = st.get<std::vector<double>>("scores_a");
        if (st.has("scores_b")) cfg.stats.scores_b = st.get<std::vector<double>>("scores_b");
        st.finish();
        const bool reports = cfg.stats.report_a && cfg.stats.report_b;
        const bool inline_scores = !cfg.stats.scores_a.empty() || !cfg.stats.scores_b.empty();
        if (reports == inline_scores) {
            throw ConfigError("stats: give either report_a and report_b, or scores_a and scores_b");
        }
    }
    cfg.lilliefors_replicates = s.get_or<std::size_t>("lilliefors_replicates", cfg.lilliefors_replicates);
    if (cfg.lilliefors_replicates < 1) throw ConfigError("lilliefors_replicates: must be >= 1");
    cfg.save_alignment_models = s.get_or<bool>("save_alignment_models", false);
    s.finish();
    return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_experiment_config(j, path.parent_path());
}

std::string config_fingerprint(const PipelineConfig& cfg) {
    return sha256_hex(pipeline_to_json(cfg).dump());
}

}  // namespace spdalign
