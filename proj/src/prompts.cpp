#include "consys/prompts.hpp"

#include <sstream>

namespace consys {

std::string systematization_primer() {
  return
      "You are helping to systematize a background concept: turning a broad, "
      "contested notion into an explicit, structured, measurable account. The "
      "output is a concept spec: a set of distinct patterns that collectively "
      "cover the ways the concept can manifest as observable phenomena in "
      "text. Each pattern has a template (a descriptive phrase interspersed "
      "with [SLOT_NAME] placeholders), key terms with definitions, slots whose "
      "values carry precise inclusion/exclusion criteria, and theory "
      "references that justify the pattern's inclusion.";
}

std::string concept_spec_schema_description() {
  return
      "Produce a single JSON object with this exact layout and no extra "
      "fields:\n"
      "{\n"
      "  \"concept_name\": string,\n"
      "  \"concept_brief\": string,\n"
      "  \"patterns\": [\n"
      "    {\n"
      "      \"id\": string (short token, unique),\n"
      "      \"template\": string with [SLOT_NAME] placeholders,\n"
      "      \"key_terms\": [{\"term\": string, \"definition\": string}],\n"
      "      \"slots\": [\n"
      "        {\"name\": UPPERCASE token, \"definition\": string,\n"
      "         \"topology\": \"single_choice\" | \"multi_label\",\n"
      "         \"values\": [{\"name\": string, \"definition\": string}]\n"
      "         OR \"children\": [nested slots]}\n"
      "      ],\n"
      "      \"theories\": [{\"citation\": string}]\n"
      "    }\n"
      "  ]\n"
      "}\n"
      "Every placeholder in a template must match a slot name; every "
      "top-level slot must appear in the template; every pattern needs at "
      "least one theory reference.";
}

std::string worksheet_criteria_text(const QuestionBank& bank) {
  std::ostringstream os;
  os << "The concept spec will be validated against six attributes, scored "
        "1-5:\n";
  for (WorksheetAttribute a : kAllAttributes) {
    os << "- " << to_string(a) << " ("
       << (attribute_scope(a) == AttributeScope::spec ? "spec" : "process")
       << " scope):";
    for (const WorksheetQuestion& q : bank.questions.at(a))
      os << " " << q.question_text;
    os << "\n";
  }
  return os.str();
}

std::string research_agent_prompt() {
  return
      "You are a research agent. Gather and synthesize the relevant "
      "literature on the given background concept into a detailed markdown "
      "report with section headings. Cover definitions, theoretical accounts, "
      "observable manifestations, and points of disagreement. End with a "
      "\"Sources\" section listing the works you drew on.";
}

std::string panel_selector_prompt(int panel_size) {
  std::ostringstream os;
  os << "You are a panel selector. Based on the concept brief and the "
        "research report, instantiate a diverse panel of exactly "
     << panel_size
     << " expert personas. Each persona has a distinct name, a general area "
        "of expertise, and a sub-area of expertise. Favor breadth: legal, "
        "linguistic, sociological, technical, and affected-community "
        "perspectives where applicable.";
  return os.str();
}

std::string expert_persona_prompt() {
  return
      "You are participating in a structured expert elicitation. Stay in the "
      "persona described below. Independently propose observable phenomena "
      "associated with the concept from your point of view. For each "
      "phenomenon give a short label, a description, the theory it is "
      "grounded in, and a concrete example. Do not speculate about what "
      "other panelists might say.";
}

std::string moderator_prompt() {
  return
      "You are the moderator of a structured expert elicitation. Synthesize "
      "the panelists' proposals into families of phenomena: merge proposals "
      "that describe the same phenomenon and retain genuinely distinct ones. "
      "Account for every proposal exactly once, listing which persona/"
      "phenomenon pairs each family was merged from.";
}

std::string synthesizer_prompt() {
  return
      "You are a synthesizer agent. Draft a concept spec from the research "
      "report and the final expert synthesis. Ground every pattern in at "
      "least one theory; where a theory comes from the report or the "
      "discussion, you may anchor it to that artifact.";
}

std::string validator_prompt(const QuestionBank& bank) {
  return
      "You are a validator agent. Score the draft concept spec and the "
      "process artifacts using the validation worksheet below. Answer each "
      "question, then give an integer 1-5 score per attribute, plus concise "
      "actionable feedback for the synthesizer.\n\n" +
      worksheet_criteria_text(bank);
}

std::string annotator_system_prompt() {
  return
      "You are an annotator. Given a concept spec and one sample, judge for "
      "every slot value whether it applies to the sample (true/false), with a "
      "brief rationale (at most 280 characters) for every value you mark "
      "true. Judge only what the text supports. For single-choice slots mark "
      "at most one value true.";
}

}  // namespace consys
