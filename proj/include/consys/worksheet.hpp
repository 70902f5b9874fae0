#ifndef CONSYS_WORKSHEET_HPP
#define CONSYS_WORKSHEET_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace consys {

enum class WorksheetAttribute {
  clarity,
  operationalizability,
  granularity,
  provenance,
  completeness,
  salience,
};

enum class AttributeScope { spec, process };

constexpr std::array<WorksheetAttribute, 6> kAllAttributes = {
    WorksheetAttribute::clarity,        WorksheetAttribute::operationalizability,
    WorksheetAttribute::granularity,    WorksheetAttribute::provenance,
    WorksheetAttribute::completeness,   WorksheetAttribute::salience,
};

std::string to_string(WorksheetAttribute a);
WorksheetAttribute attribute_from_string(const std::string& s);
AttributeScope attribute_scope(WorksheetAttribute a);

struct WorksheetQuestion {
  std::string question_id;
  std::string question_text;
};

struct QuestionBank {
  std::map<WorksheetAttribute, std::vector<WorksheetQuestion>> questions;
};

/// Score is an integer 1-5 or not-applicable (process attributes on a
/// target with no process artifacts).
struct AttributeScore {
  std::optional<int> value;  // nullopt == not_applicable
};

struct QuestionResponse {
  std::string question_id;
  std::string answer_text;
};

struct WorksheetAssessment {
  std::string target;    // spec id and/or artifact-set id
  std::string assessor;  // agent model id or human label
  std::map<WorksheetAttribute, std::vector<QuestionResponse>> responses;
  std::map<WorksheetAttribute, AttributeScore> scores;
};

struct AttributeSummary {
  std::optional<double> spec_mean;
  std::optional<int> spec_min;
  std::optional<double> process_mean;
  std::optional<int> process_min;
  bool process_not_applicable = false;  // all process attributes were n/a
};

/// Default bank: one structured question per attribute. Stand-in wording
/// (the published worksheet is not machine-readable); override by file.
QuestionBank default_question_bank();
QuestionBank parse_question_bank(const nlohmann::json& j);

void check_assessment(const WorksheetAssessment& a);  // throws on invariant break
AttributeSummary score_assessment(const WorksheetAssessment& a);

/// Human-fillable markdown worksheet, one section per attribute.
std::string render_worksheet(const QuestionBank& bank, const std::string& target,
                             const WorksheetAssessment* prefill = nullptr);
WorksheetAssessment parse_assessment_document(const std::string& document);

nlohmann::json assessment_to_json(const WorksheetAssessment& a);
WorksheetAssessment assessment_from_json(const nlohmann::json& j);

}  // namespace consys

#endif
