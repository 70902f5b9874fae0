#ifndef CONSYS_PROMPTS_HPP
#define CONSYS_PROMPTS_HPP

#include <string>

#include "consys/worksheet.hpp"

namespace consys {

// Versioned prompt fragments. Wording is our own paraphrase of the task
// framing; version tags keep runs reproducible when text changes.

constexpr const char* kPromptAssetVersion = "prompts-v1";

/// What systematization is and what a concept spec contains.
std::string systematization_primer();

/// The concept-spec schema, as instructions plus the JSON layout.
std::string concept_spec_schema_description();

/// Worksheet attribute definitions + questions, rendered for prompt use.
std::string worksheet_criteria_text(const QuestionBank& bank);

std::string research_agent_prompt();
std::string panel_selector_prompt(int panel_size);
std::string expert_persona_prompt();
std::string moderator_prompt();
std::string synthesizer_prompt();
std::string validator_prompt(const QuestionBank& bank);
std::string annotator_system_prompt();

}  // namespace consys

#endif
