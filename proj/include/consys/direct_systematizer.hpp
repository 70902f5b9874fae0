#ifndef CONSYS_DIRECT_SYSTEMATIZER_HPP
#define CONSYS_DIRECT_SYSTEMATIZER_HPP

#include <string>

#include "consys/llm_gateway.hpp"
#include "consys/spec_model.hpp"
#include "consys/worksheet.hpp"

namespace consys {

struct ConceptBrief {
  std::string concept_name;
  std::string description;
  std::string context;  // e.g. "text generated by AI systems"
};

struct DirectOptions {
  std::string model_id = "default";
  double temperature = 0.2;
  QuestionBank bank = default_question_bank();
};

/// Schema a generated concept spec must conform to (shared with the
/// multi-agent synthesizer).
OutputSchema concept_spec_output_schema();

/// One structured LLM call from brief to spec: prompt = systematization
/// primer + worksheet criteria + schema description. The gateway's schema
/// repair round-trip is the only second call ever made.
ConceptSpec systematize_direct(Gateway& gateway, const ConceptBrief& brief,
                               const DirectOptions& options = {});

}  // namespace consys

#endif
