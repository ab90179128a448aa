#pragma once

// JSON and CSV serialisation of experiment results and fitted alignment
// models. Every JSON document carries "schema" and "schema_version".

#include <filesystem>
#include <string>

#include "json.hpp"
#include "spdalign/eval.hpp"
#include "spdalign/stats.hpp"

namespace spdalign {

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PairedTests& t);
PairedTests paired_tests_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SubjectResult& r);
SubjectResult subject_result_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AblationReport& r);
AblationReport ablation_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CrossMontageReport& r);
nlohmann::json to_json(const LearningCurveReport& r);

nlohmann::json to_json(const AlignmentModel& m);
AlignmentModel alignment_model_from_json(const nlohmann::json& j);

/// subject,f1,fold_a_f1,fold_b_f1,fold_a_n_v,fold_b_n_v
std::string scores_csv(const EvalReport& r);
/// strategy,mean,sd,ci_low,ci_high plus one column per subject.
std::string ablation_csv(const AblationReport& r);
/// arm,alignment,montage,mean,sd,ci_low,ci_high
std::string cross_montage_csv(const CrossMontageReport& r);
/// n_train,fold,f1
std::string learning_curve_csv(const LearningCurveReport& r);
/// model,n,prediction
std::string curve_fit_csv(const LearningCurveReport& r);

/// Writes `j.dump(2)` plus a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace spdalign
