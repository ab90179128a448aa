#include "spdalign/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spdalign/config.hpp"
#include "spdalign/error.hpp"

namespace spdalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_json(const MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DataError("matrix: " + std::to_string(data.size()) + " values for " +
                        std::to_string(rows) + "x" + std::to_string(cols));
    }
    MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
    }
    return m;
}

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_schema(const json& j, const char* schema) {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != schema) {
        throw DataError(std::string("expected a ") + schema + " document");
    }
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
        throw DataError(std::string(schema) + ": unknown schema version");
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

json to_json(const Summary& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}};
}

Summary summary_from_json(const json& j) {
    Summary s;
    s.n = j.at("n").get<std::size_t>();
    s.mean = j.at("mean").get<double>();
    s.sd = j.at("sd").get<double>();
    s.ci_low = j.at("ci_low").get<double>();
    s.ci_high = j.at("ci_high").get<double>();
    return s;
}

json to_json(const PairedTests& t) {
    return {{"lilliefors_statistic", t.lilliefors_statistic},
            {"lilliefors_p", t.lilliefors_p},
            {"t", t.t},
            {"t_p", t.t_p},
            {"wilcoxon_w", t.w},
            {"wilcoxon_p", t.wilcoxon_p},
            {"chosen_test", t.chosen_test},
            {"chosen_p", t.chosen_p}};
}

PairedTests paired_tests_from_json(const json& j) {
    PairedTests t{};
    t.lilliefors_statistic = j.at("lilliefors_statistic").get<double>();
    t.lilliefors_p = j.at("lilliefors_p").get<double>();
    t.t = j.at("t").get<double>();
    t.t_p = j.at("t_p").get<double>();
    t.w = j.at("wilcoxon_w").get<double>();
    t.wilcoxon_p = j.at("wilcoxon_p").get<double>();
    t.chosen_test = j.at("chosen_test").get<std::string>();
    t.chosen_p = j.at("chosen_p").get<double>();
    return t;
}

json to_json(const AlignmentModel& m) {
    json refs = json::array();
    for (const auto& per_subject : m.references) {
        json branch = json::array();
        for (const auto& r : per_subject) branch.push_back(matrix_json(r));
        refs.push_back(branch);
    }
    return {{"schema", "spdalign.alignment_model"},
            {"schema_version", kReportSchemaVersion},
            {"alignment", m.alignment},
            {"subject_ids", m.subject_ids},
            {"references", refs},
            {"train_scales", m.train_scales},
            {"test_scales", m.test_scales},
            {"rotation",
             {{"dim", m.rotation.dim()},
              {"n_v", m.rotation.n_v},
              {"variance_threshold", m.rotation.variance_threshold},
              {"singular_values", vector_json(m.rotation.singular_values)},
              {"u", matrix_json(m.rotation.u)},
              {"v", matrix_json(m.rotation.v)}}}};
}

AlignmentModel alignment_model_from_json(const json& j) {
    check_schema(j, "spdalign.alignment_model");
    AlignmentModel m;
    m.alignment = j.at("alignment").get<std::string>();
    m.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    for (const auto& per_subject : j.at("references")) {
        std::vector<MatrixXd> branch;
        for (const auto& r : per_subject) branch.push_back(matrix_from_json(r));
        m.references.push_back(std::move(branch));
    }
    m.train_scales = j.at("train_scales").get<std::vector<double>>();
    m.test_scales = j.at("test_scales").get<std::vector<double>>();
    const auto& r = j.at("rotation");
    m.rotation.n_v = r.at("n_v").get<Eigen::Index>();
    m.rotation.variance_threshold = r.at("variance_threshold").get<double>();
    m.rotation.singular_values = vector_from_json(r.at("singular_values"));
    m.rotation.u = matrix_from_json(r.at("u"));
    m.rotation.v = matrix_from_json(r.at("v"));
    if (m.rotation.u.cols() != m.rotation.n_v || m.rotation.v.cols() != m.rotation.n_v ||
        m.rotation.u.rows() != m.rotation.v.rows()) {
        throw DataError("alignment model: rotation factors inconsistent with n_v");
    }
    return m;
}

json to_json(const SubjectResult& r) {
    json folds = json::array();
    for (const auto& f : r.folds) {
        folds.push_back({{"f1", f.f1},
                         {"per_class_f1", f.per_class},
                         {"n_calibration", f.n_calibration},
                         {"n_evaluation", f.n_evaluation},
                         {"n_v", f.n_v}});
    }
    return {{"subject", r.subject_id},
            {"f1", r.f1},
            {"folds", folds},
            {"training_subjects", r.training_subjects},
            {"train_dim", r.train_dim},
            {"test_dim", r.test_dim},
            {"svm_converged", r.svm_converged},
            {"upstream_fingerprint", r.upstream_fingerprint},
            {"training_fingerprint", r.training_fingerprint}};
}

SubjectResult subject_result_from_json(const json& j) {
    SubjectResult r;
    r.subject_id = j.at("subject").get<std::string>();
    r.f1 = j.at("f1").get<double>();
    const auto& folds = j.at("folds");
    if (folds.size() != 2) throw DataError("subject result: expected 2 folds");
    for (std::size_t k = 0; k < 2; ++k) {
        auto& f = r.folds[k];
        f.f1 = folds[k].at("f1").get<double>();
        f.per_class = folds[k].at("per_class_f1").get<std::vector<double>>();
        f.n_calibration = folds[k].at("n_calibration").get<std::size_t>();
        f.n_evaluation = folds[k].at("n_evaluation").get<std::size_t>();
        f.n_v = folds[k].at("n_v").get<Eigen::Index>();
    }
    r.training_subjects = j.at("training_subjects").get<std::vector<std::string>>();
    r.train_dim = j.at("train_dim").get<Eigen::Index>();
    r.test_dim = j.at("test_dim").get<Eigen::Index>();
    r.svm_converged = j.at("svm_converged").get<bool>();
    r.upstream_fingerprint = j.at("upstream_fingerprint").get<std::string>();
    r.training_fingerprint = j.at("training_fingerprint").get<std::string>();
    return r;
}

json to_json(const EvalReport& r) {
    json subjects = json::array();
    for (const auto& s : r.subjects) subjects.push_back(to_json(s));
    return {{"schema", "spdalign.eval_report"},
            {"schema_version", kReportSchemaVersion},
            {"condition", r.condition},
            {"config", pipeline_to_json(r.config)},
            {"pipeline_fingerprint", r.pipeline_fingerprint},
            {"dataset_hash", r.dataset_hash},
            {"seed", r.config.seed},
            {"f1_average", "macro"},
            {"ci", "t-distribution, n-1 df, 95%"},
            {"summary", to_json(r.summary)},
            {"subjects", subjects},
            {"notes", r.notes}};
}

EvalReport eval_report_from_json(const json& j) {
    check_schema(j, "spdalign.eval_report");
    EvalReport r;
    r.condition = j.at("condition").get<std::string>();
    r.config = pipeline_from_json(j.at("config"), "config");
    r.pipeline_fingerprint = j.at("pipeline_fingerprint").get<std::string>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.summary = summary_from_json(j.at("summary"));
    for (const auto& s : j.at("subjects")) r.subjects.push_back(subject_result_from_json(s));
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

json to_json(const AblationReport& r) {
    json arms = json::array();
    for (const auto& a : r.arms) arms.push_back(to_json(a));
    json comps = json::array();
    for (const auto& c : r.comparisons) {
        json item = {{"a", c.a}, {"b", c.b}};
        item["tests"] = c.tests ? to_json(*c.tests) : json(nullptr);
        item["skipped_reason"] = c.skipped_reason;
        comps.push_back(item);
    }
    // Component checkmarks per strategy: recentring, rescaling, rotation.
    json table = json::array();
    for (const auto& a : r.arms) {
        const Alignment al = a.config.alignment;
        table.push_back({{"strategy", to_string(al)},
                         {"euclidean_recentring", al == Alignment::adaptive_m},
                         {"pooled_recentring", al == Alignment::ts},
                         {"subject_recentring", al == Alignment::itsa},
                         {"rescale", uses_rotation(al)},
                         {"rotation", uses_rotation(al)},
                         {"mean_f1", a.summary.mean},
                         {"sd_f1", a.summary.sd}});
    }
    return {{"schema", "spdalign.ablation_report"},
            {"schema_version", kReportSchemaVersion},
            {"fusion", to_string(r.fusion)},
            {"seed", r.arms.empty() ? 0 : r.arms.front().config.seed},
            {"table", table},
            {"arms", arms},
            {"comparisons", comps}};
}

AblationReport ablation_report_from_json(const json& j) {
    check_schema(j, "spdalign.ablation_report");
    AblationReport r;
    r.fusion = fusion_from_string(j.at("fusion").get<std::string>());
    for (const auto& a : j.at("arms")) r.arms.push_back(eval_report_from_json(a));
    for (const auto& c : j.at("comparisons")) {
        ComparisonResult cr;
        cr.a = c.at("a").get<std::string>();
        cr.b = c.at("b").get<std::string>();
        if (!c.at("tests").is_null()) cr.tests = paired_tests_from_json(c.at("tests"));
        cr.skipped_reason = c.at("skipped_reason").get<std::string>();
        r.comparisons.push_back(std::move(cr));
    }
    return r;
}

json to_json(const CrossMontageReport& r) {
    json arms = json::array();
    for (const auto& a : r.arms) {
        json item = to_json(a);
        item["montage"] = a.config.montage.empty() ? "full" : "reduced";
        arms.push_back(item);
    }
    json drops = json::array();
    for (const auto& d : r.drops) {
        drops.push_back({{"alignment", d.alignment}, {"drops", d.drops}, {"summary", to_json(d.summary)}});
    }
    return {{"schema", "spdalign.cross_montage_report"},
            {"schema_version", kReportSchemaVersion},
            {"test_montage", r.test_montage},
            {"retain", r.retain},
            {"train_branch_dims", r.train_dims},
            {"test_branch_dims", r.test_dims},
            {"reduced_branch_dims", r.reduced_dims},
            {"arms", arms},
            {"drops", drops}};
}

json to_json(const LearningCurveReport& r) {
    json points = json::array();
    for (const auto& p : r.points) {
        points.push_back({{"n_train", p.n_train}, {"fold_scores", p.fold_scores}, {"summary", to_json(p.summary)}});
    }
    json fit = nullptr;
    if (r.fit) {
        fit = {{"linear", {{"a", r.fit->linear.a}, {"b", r.fit->linear.b}}},
               {"logarithmic", {{"a", r.fit->logarithmic.a}, {"b", r.fit->logarithmic.b}}},
               {"predict_at", r.fit->predict_at},
               {"linear_predictions", r.fit->linear_predictions},
               {"log_predictions", r.fit->log_predictions}};
    }
    return {{"schema", "spdalign.learning_curve_report"},
            {"schema_version", kReportSchemaVersion},
            {"points", points},
            {"fit", fit}};
}

std::string scores_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "subject,f1,fold_a_f1,fold_b_f1,fold_a_n_v,fold_b_n_v\n";
    for (const auto& s : r.subjects) {
        out << s.subject_id << ',' << num(s.f1) << ',' << num(s.folds[0].f1) << ','
            << num(s.folds[1].f1) << ',' << s.folds[0].n_v << ',' << s.folds[1].n_v << '\n';
    }
    return out.str();
}

std::string ablation_csv(const AblationReport& r) {
    std::ostringstream out;
    out << "strategy,mean,sd,ci_low,ci_high";
    if (!r.arms.empty()) {
        for (const auto& s : r.arms.front().subjects) out << ',' << s.subject_id;
    }
    out << '\n';
    for (const auto& a : r.arms) {
        out << to_string(a.config.alignment) << ',' << num(a.summary.mean) << ',' << num(a.summary.sd)
            << ',' << num(a.summary.ci_low) << ',' << num(a.summary.ci_high);
        for (const auto& s : a.subjects) out << ',' << num(s.f1);
        out << '\n';
    }
    return out.str();
}

std::string cross_montage_csv(const CrossMontageReport& r) {
    std::ostringstream out;
    out << "arm,alignment,montage,mean,sd,ci_low,ci_high\n";
    for (std::size_t i = 0; i < r.arms.size(); ++i) {
        const auto& a = r.arms[i];
        out << i << ',' << to_string(a.config.alignment) << ','
            << (a.config.montage.empty() ? "full" : "reduced") << ',' << num(a.summary.mean) << ','
            << num(a.summary.sd) << ',' << num(a.summary.ci_low) << ',' << num(a.summary.ci_high)
            << '\n';
    }
    return out.str();
}

std::string learning_curve_csv(const LearningCurveReport& r) {
    std::ostringstream out;
    out << "n_train,fold,f1\n";
    for (const auto& p : r.points) {
        for (std::size_t f = 0; f < p.fold_scores.size(); ++f) {
            out << p.n_train << ',' << f << ',' << num(p.fold_scores[f]) << '\n';
        }
    }
    return out.str();
}

std::string curve_fit_csv(const LearningCurveReport& r) {
    std::ostringstream out;
    out << "model,n,prediction\n";
    if (!r.fit) return out.str();
    for (std::size_t i = 0; i < r.fit->predict_at.size(); ++i) {
        out << "linear," << num(r.fit->predict_at[i]) << ',' << num(r.fit->linear_predictions[i]) << '\n';
    }
    for (std::size_t i = 0; i < r.fit->predict_at.size(); ++i) {
        out << "logarithmic," << num(r.fit->predict_at[i]) << ',' << num(r.fit->log_predictions[i]) << '\n';
    }
    return out.str();
}

void write_json_file(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

}  // namespace spdalign
