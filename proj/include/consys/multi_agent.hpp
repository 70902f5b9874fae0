#ifndef CONSYS_MULTI_AGENT_HPP
#define CONSYS_MULTI_AGENT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "consys/artifact_store.hpp"
#include "consys/direct_systematizer.hpp"
#include "consys/llm_gateway.hpp"
#include "consys/spec_model.hpp"
#include "consys/worksheet.hpp"

namespace consys {

struct ResearchReport {
  std::string concept_name;
  std::string body;  // markdown
  std::vector<std::string> cited_sources;
  std::string model_id;
  std::string timestamp;
};

struct ExpertPersona {
  std::string name;
  std::string general_expertise;
  std::string sub_area_expertise;
};

struct Phenomenon {
  std::string label;
  std::string description;
  std::string theory;
  std::string example;
};

struct Proposal {
  std::string persona_name;
  std::vector<Phenomenon> phenomena;
  int round_index = 1;
};

struct PhenomenonRef {
  std::string persona_name;
  std::string phenomenon_label;
  bool operator==(const PhenomenonRef&) const = default;
  auto operator<=>(const PhenomenonRef&) const = default;
};

struct PhenomenonFamily {
  std::string label;
  std::string description;
  std::vector<PhenomenonRef> merged_from;
  bool retained_distinct = false;
};

struct ModeratorSynthesis {
  int round_index = 1;
  std::vector<PhenomenonFamily> families;
};

struct DraftCritique {
  int draft_index = 1;
  WorksheetAssessment assessment;
  std::string feedback;
};

struct RoleConfig {
  std::string model_id = "default";
  double temperature = 0.2;
};

struct RunConfig {
  int panel_size = 6;
  int delphi_rounds = 3;
  int max_spec_rounds = 3;
  int score_threshold = 4;
  std::map<std::string, RoleConfig> roles;  // research, panel, expert, moderator, synthesizer, validator
  uint64_t seed = 0;
  QuestionBank bank = default_question_bank();

  RoleConfig role(const std::string& name) const;
  void check() const;
  nlohmann::json snapshot() const;
};

struct MultiAgentResult {
  ConceptSpec spec;
  nlohmann::json manifest;
  WorksheetAssessment final_assessment;
  int spec_rounds_used = 0;
};

ResearchReport contextualize(Gateway& gateway, const ConceptBrief& brief,
                             const RunConfig& config);

std::vector<ExpertPersona> select_panel(Gateway& gateway, const ConceptBrief& brief,
                                        const ResearchReport& report,
                                        const RunConfig& config);

/// One Delphi round: every persona proposes independently (no cross-persona
/// visibility within the round), then the moderator synthesizes. The
/// synthesis must account for every proposed phenomenon exactly once.
std::pair<std::vector<Proposal>, ModeratorSynthesis> run_delphi_round(
    Gateway& gateway, const std::vector<ExpertPersona>& personas,
    const std::optional<ModeratorSynthesis>& prior, const ResearchReport& report,
    int round_index, const RunConfig& config);

ModeratorSynthesis run_delphi(Gateway& gateway,
                              const std::vector<ExpertPersona>& personas,
                              const ResearchReport& report, int rounds,
                              const RunConfig& config, RunStore* store = nullptr);

ConceptSpec synthesize_spec(Gateway& gateway, const ResearchReport& report,
                            const ModeratorSynthesis& final_synthesis,
                            const std::optional<ConceptSpec>& prior_draft,
                            const std::optional<DraftCritique>& prior_critique,
                            const RunConfig& config);

DraftCritique validate_draft(Gateway& gateway, const ConceptSpec& draft,
                             const ResearchReport& report,
                             const ModeratorSynthesis& final_synthesis,
                             int draft_index, const RunConfig& config);

/// Full three-phase pipeline, persisting every artifact into `run_dir`.
/// Stops when all six worksheet scores reach config.score_threshold or after
/// config.max_spec_rounds drafts. On failure the manifest (status `failed`)
/// lists everything produced so far.
MultiAgentResult systematize_multi(Gateway& gateway, const ConceptBrief& brief,
                                   const RunConfig& config,
                                   const std::filesystem::path& run_dir);

}  // namespace consys

#endif
