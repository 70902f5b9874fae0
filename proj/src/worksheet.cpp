#include "consys/worksheet.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace consys {

using nlohmann::json;

std::string to_string(WorksheetAttribute a) {
  switch (a) {
    case WorksheetAttribute::clarity: return "clarity";
    case WorksheetAttribute::operationalizability: return "operationalizability";
    case WorksheetAttribute::granularity: return "granularity";
    case WorksheetAttribute::provenance: return "provenance";
    case WorksheetAttribute::completeness: return "completeness";
    case WorksheetAttribute::salience: return "salience";
  }
  throw std::logic_error("bad attribute");
}

WorksheetAttribute attribute_from_string(const std::string& s) {
  for (WorksheetAttribute a : kAllAttributes)
    if (to_string(a) == s) return a;
  throw std::invalid_argument("unknown worksheet attribute: " + s);
}

AttributeScope attribute_scope(WorksheetAttribute a) {
  switch (a) {
    case WorksheetAttribute::clarity:
    case WorksheetAttribute::operationalizability:
    case WorksheetAttribute::granularity:
      return AttributeScope::spec;
    default:
      return AttributeScope::process;
  }
}

QuestionBank default_question_bank() {
  QuestionBank bank;
  auto add = [&](WorksheetAttribute a, const std::string& id, const std::string& q) {
    bank.questions[a].push_back({id, q});
  };
  add(WorksheetAttribute::clarity, "clarity.1",
      "Are the concept's components well-defined, with key terms precise, "
      "unambiguous, and used consistently?");
  add(WorksheetAttribute::operationalizability, "operationalizability.1",
      "Is the concept connected to observable phenomena that a measurement "
      "instrument could target in practice?");
  add(WorksheetAttribute::granularity, "granularity.1",
      "Does the spec expose fine-grained distinctions, supporting analysis at "
      "both the granular and aggregated level?");
  add(WorksheetAttribute::provenance, "provenance.1",
      "Are decision points documented and traceable, with sources that are "
      "real, relevant, and verifiable?");
  add(WorksheetAttribute::completeness, "completeness.1",
      "Do the process artifacts provide confidence in completeness and "
      "coverage of the background concept in its context of use?");
  add(WorksheetAttribute::salience, "salience.1",
      "Do the artifacts show that stakeholder needs and perspectives were "
      "taken into account?");
  return bank;
}

QuestionBank parse_question_bank(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("question bank: expected object");
  QuestionBank bank;
  for (const auto& [attr_name, arr] : j.items()) {
    WorksheetAttribute a = attribute_from_string(attr_name);
    if (!arr.is_array() || arr.empty())
      throw std::invalid_argument("question bank: attribute \"" + attr_name +
                                  "\" needs a non-empty question array");
    for (const auto& qj : arr)
      bank.questions[a].push_back({qj.at("question_id").get<std::string>(),
                                   qj.at("question_text").get<std::string>()});
  }
  for (WorksheetAttribute a : kAllAttributes)
    if (!bank.questions.count(a))
      throw std::invalid_argument("question bank: missing attribute \"" +
                                  to_string(a) + "\"");
  return bank;
}

void check_assessment(const WorksheetAssessment& a) {
  for (const auto& [attr, score] : a.scores) {
    if (score.value && (*score.value < 1 || *score.value > 5))
      throw std::invalid_argument("score for " + to_string(attr) +
                                  " outside 1-5: " + std::to_string(*score.value));
  }
}

AttributeSummary score_assessment(const WorksheetAssessment& a) {
  check_assessment(a);
  AttributeSummary out;
  double spec_sum = 0, proc_sum = 0;
  int spec_n = 0, proc_n = 0, proc_na = 0;
  for (const auto& [attr, score] : a.scores) {
    if (!score.value) {
      if (attribute_scope(attr) == AttributeScope::process) ++proc_na;
      continue;
    }
    if (attribute_scope(attr) == AttributeScope::spec) {
      spec_sum += *score.value;
      ++spec_n;
      out.spec_min = out.spec_min ? std::min(*out.spec_min, *score.value)
                                  : *score.value;
    } else {
      proc_sum += *score.value;
      ++proc_n;
      out.process_min = out.process_min ? std::min(*out.process_min, *score.value)
                                        : *score.value;
    }
  }
  if (spec_n > 0) out.spec_mean = spec_sum / spec_n;
  if (proc_n > 0) out.process_mean = proc_sum / proc_n;
  out.process_not_applicable = proc_n == 0 && proc_na > 0;
  return out;
}

std::string render_worksheet(const QuestionBank& bank, const std::string& target,
                             const WorksheetAssessment* prefill) {
  std::ostringstream os;
  os << "# Validation Worksheet\n\n";
  os << "Target: " << target << "\n";
  os << "Assessor: " << (prefill ? prefill->assessor : "") << "\n\n";
  for (WorksheetAttribute a : kAllAttributes) {
    os << "## " << to_string(a) << "\n\n";
    auto it = bank.questions.find(a);
    if (it == bank.questions.end() || it->second.empty())
      throw std::invalid_argument("question bank has no questions for " +
                                  to_string(a));
    for (const WorksheetQuestion& q : it->second) {
      os << "Q [" << q.question_id << "]: " << q.question_text << "\n";
      std::string answer;
      if (prefill) {
        auto rit = prefill->responses.find(a);
        if (rit != prefill->responses.end())
          for (const QuestionResponse& r : rit->second)
            if (r.question_id == q.question_id) answer = r.answer_text;
      }
      os << "A [" << q.question_id << "]: " << answer << "\n";
    }
    std::string score_text;
    if (prefill) {
      auto sit = prefill->scores.find(a);
      if (sit != prefill->scores.end())
        score_text = sit->second.value ? std::to_string(*sit->second.value) : "n/a";
    }
    os << "Score (1-5 or n/a): " << score_text << "\n\n";
  }
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

WorksheetAssessment parse_assessment_document(const std::string& document) {
  WorksheetAssessment out;
  std::istringstream is(document);
  std::string line;
  std::optional<WorksheetAttribute> current;
  std::set<WorksheetAttribute> seen;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.rfind("Target:", 0) == 0) {
      out.target = trim(line.substr(7));
    } else if (line.rfind("Assessor:", 0) == 0) {
      out.assessor = trim(line.substr(9));
    } else if (line.rfind("## ", 0) == 0) {
      current = attribute_from_string(trim(line.substr(3)));
      seen.insert(*current);
    } else if (line.rfind("A [", 0) == 0 && current) {
      size_t close = line.find(']');
      if (close == std::string::npos) continue;
      std::string qid = line.substr(3, close - 3);
      size_t colon = line.find(':', close);
      std::string answer = colon == std::string::npos ? "" : trim(line.substr(colon + 1));
      out.responses[*current].push_back({qid, answer});
    } else if (line.rfind("Score", 0) == 0 && current) {
      size_t colon = line.find(':');
      std::string value = colon == std::string::npos ? "" : trim(line.substr(colon + 1));
      if (value.empty()) continue;
      if (value == "n/a" || value == "N/A") {
        out.scores[*current] = AttributeScore{std::nullopt};
      } else {
        int v;
        try {
          v = std::stoi(value);
        } catch (const std::exception&) {
          throw std::invalid_argument("unparseable score for " +
                                      to_string(*current) + ": \"" + value + "\"");
        }
        if (v < 1 || v > 5)
          throw std::invalid_argument("score outside 1-5 for " +
                                      to_string(*current));
        out.scores[*current] = AttributeScore{v};
      }
    }
  }
  for (WorksheetAttribute a : kAllAttributes)
    if (!seen.count(a))
      throw std::invalid_argument("worksheet document missing section \"" +
                                  to_string(a) + "\"");
  return out;
}

json assessment_to_json(const WorksheetAssessment& a) {
  json j;
  j["target"] = a.target;
  j["assessor"] = a.assessor;
  json responses = json::array();
  for (const auto& [attr, rs] : a.responses)
    for (const QuestionResponse& r : rs)
      responses.push_back({{"attribute", to_string(attr)},
                           {"question_id", r.question_id},
                           {"answer_text", r.answer_text}});
  j["responses"] = std::move(responses);
  json scores = json::object();
  for (const auto& [attr, s] : a.scores) {
    if (s.value)
      scores[to_string(attr)] = *s.value;
    else
      scores[to_string(attr)] = "n/a";
  }
  j["scores"] = std::move(scores);
  return j;
}

WorksheetAssessment assessment_from_json(const json& j) {
  WorksheetAssessment a;
  a.target = j.value("target", "");
  a.assessor = j.value("assessor", "");
  if (j.contains("responses"))
    for (const auto& rj : j.at("responses")) {
      WorksheetAttribute attr =
          attribute_from_string(rj.at("attribute").get<std::string>());
      a.responses[attr].push_back({rj.at("question_id").get<std::string>(),
                                   rj.value("answer_text", "")});
    }
  if (j.contains("scores"))
    for (const auto& [attr_name, v] : j.at("scores").items()) {
      WorksheetAttribute attr = attribute_from_string(attr_name);
      if (v.is_string()) {
        if (v.get<std::string>() != "n/a")
          throw std::invalid_argument("bad score value for " + attr_name);
        a.scores[attr] = AttributeScore{std::nullopt};
      } else {
        a.scores[attr] = AttributeScore{v.get<int>()};
      }
    }
  check_assessment(a);
  return a;
}

}  // namespace consys
