#include "consys/multi_agent.hpp"

#include <chrono>
#include <ctime>
#include <map>
#include <set>
#include <sstream>

#include "consys/prompts.hpp"

namespace consys {

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

/// Structured call with a semantic check on top of the schema; the single
/// repair round-trip covers either kind of failure.
json complete_checked(Gateway& gateway, ChatRequest request,
                      const std::function<std::optional<std::string>(const json&)>& check) {
  auto attempt = [&](const std::string& text,
                     std::string& error) -> std::optional<json> {
    json value;
    try {
      value = extract_json_reply(text);
    } catch (const std::exception& e) {
      error = std::string("reply is not valid JSON: ") + e.what();
      return std::nullopt;
    }
    auto schema_errors = request.output_schema->validate(value);
    if (!schema_errors.empty()) {
      std::ostringstream os;
      for (const auto& e : schema_errors) os << e << "; ";
      error = os.str();
      return std::nullopt;
    }
    if (auto semantic = check(value)) {
      error = *semantic;
      return std::nullopt;
    }
    return value;
  };

  TranscriptRecord record = gateway.complete(request);
  std::string error;
  if (auto value = attempt(record.response_text, error)) return *value;

  ChatRequest repair = request;
  repair.messages.push_back({ChatRole::assistant, record.response_text});
  repair.messages.push_back(
      {ChatRole::user, "Your reply was invalid: " + error +
                           "\nReply again with corrected JSON only."});
  TranscriptRecord second = gateway.complete(repair);
  if (auto value = attempt(second.response_text, error)) return *value;
  throw GatewayError(GatewayErrorKind::schema,
                     "structured reply invalid after repair: " + error);
}

std::string synthesis_text(const ModeratorSynthesis& s) {
  std::ostringstream os;
  os << "Round " << s.round_index << " synthesis:\n";
  for (const PhenomenonFamily& f : s.families) {
    os << "- " << f.label << (f.retained_distinct ? " (distinct)" : "") << ": "
       << f.description << " [from:";
    for (const PhenomenonRef& r : f.merged_from)
      os << " " << r.persona_name << "/" << r.phenomenon_label << ";";
    os << "]\n";
  }
  return os.str();
}

json proposal_to_json(const Proposal& p) {
  json phenomena = json::array();
  for (const Phenomenon& ph : p.phenomena)
    phenomena.push_back({{"label", ph.label},
                         {"description", ph.description},
                         {"theory", ph.theory},
                         {"example", ph.example}});
  return {{"persona", p.persona_name},
          {"round_index", p.round_index},
          {"phenomena", phenomena}};
}

json synthesis_to_json(const ModeratorSynthesis& s) {
  json families = json::array();
  for (const PhenomenonFamily& f : s.families) {
    json merged = json::array();
    for (const PhenomenonRef& r : f.merged_from)
      merged.push_back({{"persona", r.persona_name},
                        {"phenomenon", r.phenomenon_label}});
    families.push_back({{"label", f.label},
                        {"description", f.description},
                        {"merged_from", merged},
                        {"retained_distinct", f.retained_distinct}});
  }
  return {{"round_index", s.round_index}, {"families", families}};
}

}  // namespace

RoleConfig RunConfig::role(const std::string& name) const {
  auto it = roles.find(name);
  if (it != roles.end()) return it->second;
  RoleConfig rc;
  // Proposal calls want breadth; everything else wants stability.
  rc.temperature = name == "expert" ? 0.8 : 0.2;
  return rc;
}

void RunConfig::check() const {
  if (panel_size < 1) throw std::invalid_argument("panel_size must be >= 1");
  if (delphi_rounds < 1) throw std::invalid_argument("delphi_rounds must be >= 1");
  if (max_spec_rounds < 1) throw std::invalid_argument("max_spec_rounds must be >= 1");
  if (score_threshold < 1 || score_threshold > 5)
    throw std::invalid_argument("score_threshold must be in [1,5]");
}

json RunConfig::snapshot() const {
  json roles_j = json::object();
  for (const auto& [name, rc] : roles)
    roles_j[name] = {{"model_id", rc.model_id}, {"temperature", rc.temperature}};
  return {{"panel_size", panel_size},
          {"delphi_rounds", delphi_rounds},
          {"max_spec_rounds", max_spec_rounds},
          {"score_threshold", score_threshold},
          {"roles", roles_j},
          {"seed", seed},
          {"prompt_version", kPromptAssetVersion}};
}

ResearchReport contextualize(Gateway& gateway, const ConceptBrief& brief,
                             const RunConfig& config) {
  if (brief.description.empty())
    throw std::invalid_argument("concept brief has an empty description");
  const RoleConfig rc = config.role("research");
  ChatRequest request;
  request.model_id = rc.model_id;
  request.temperature = rc.temperature;
  request.max_output_tokens = 16384;
  std::ostringstream user;
  user << "Concept: " << brief.concept_name << "\n" << brief.description << "\n";
  if (!brief.context.empty()) user << "Context of use: " << brief.context << "\n";
  request.messages = {{ChatRole::system, research_agent_prompt()},
                      {ChatRole::user, user.str()}};
  TranscriptRecord record = gateway.complete(request);
  if (record.response_text.empty())
    throw std::runtime_error("research agent returned an empty report");

  ResearchReport report;
  report.concept_name = brief.concept_name;
  report.body = record.response_text;
  report.model_id = rc.model_id;
  report.timestamp = iso_timestamp();
  // Lines of the trailing "Sources" section become cited_sources.
  std::istringstream is(report.body);
  std::string line;
  bool in_sources = false;
  while (std::getline(is, line)) {
    if (line.rfind("#", 0) == 0) {
      in_sources = line.find("Sources") != std::string::npos;
      continue;
    }
    if (in_sources && line.find_first_not_of(" \t-*") != std::string::npos) {
      size_t start = line.find_first_not_of(" \t-*");
      report.cited_sources.push_back(line.substr(start));
    }
  }
  return report;
}

std::vector<ExpertPersona> select_panel(Gateway& gateway, const ConceptBrief& brief,
                                        const ResearchReport& report,
                                        const RunConfig& config) {
  const RoleConfig rc = config.role("panel");
  ChatRequest request;
  request.model_id = rc.model_id;
  request.temperature = rc.temperature;
  request.output_schema = OutputSchema::object(
      {{"personas",
        OutputSchema::array(
            OutputSchema::object({{"name", OutputSchema::string(false)},
                                  {"general_expertise", OutputSchema::string(false)},
                                  {"sub_area_expertise", OutputSchema::string(false)}}),
            1)}});
  std::ostringstream user;
  user << "Concept: " << brief.concept_name << "\n" << brief.description
       << "\n\nResearch report:\n" << report.body;
  request.messages = {{ChatRole::system, panel_selector_prompt(config.panel_size)},
                      {ChatRole::user, user.str()}};

  json value = complete_checked(gateway, request, [&](const json& v) -> std::optional<std::string> {
    const json& personas = v.at("personas");
    if ((int)personas.size() != config.panel_size)
      return "expected exactly " + std::to_string(config.panel_size) +
             " personas, got " + std::to_string(personas.size());
    std::set<std::string> names;
    for (const auto& p : personas)
      if (!names.insert(p.at("name").get<std::string>()).second)
        return "duplicate persona name \"" + p.at("name").get<std::string>() + "\"";
    return std::nullopt;
  });

  std::vector<ExpertPersona> out;
  for (const auto& p : value.at("personas"))
    out.push_back({p.at("name"), p.at("general_expertise"), p.at("sub_area_expertise")});
  return out;
}

std::pair<std::vector<Proposal>, ModeratorSynthesis> run_delphi_round(
    Gateway& gateway, const std::vector<ExpertPersona>& personas,
    const std::optional<ModeratorSynthesis>& prior, const ResearchReport& report,
    int round_index, const RunConfig& config) {
  if (personas.empty()) throw std::invalid_argument("persona list is empty");

  const OutputSchema proposal_schema = OutputSchema::object(
      {{"phenomena",
        OutputSchema::array(
            OutputSchema::object({{"label", OutputSchema::string(false)},
                                  {"description", OutputSchema::string(false)},
                                  {"theory", OutputSchema::string(false)},
                                  {"example", OutputSchema::string(false)}}),
            1)}});

  // Independent proposal calls: each request sees only the persona, the
  // report, and the prior round's synthesis. Never another persona's
  // same-round proposal.
  std::vector<Proposal> proposals;
  const RoleConfig expert_rc = config.role("expert");
  for (const ExpertPersona& persona : personas) {
    ChatRequest request;
    request.model_id = expert_rc.model_id;
    request.temperature = expert_rc.temperature;
    request.output_schema = proposal_schema;
    std::ostringstream user;
    user << "Persona: " << persona.name << "\nGeneral expertise: "
         << persona.general_expertise << "\nSub-area expertise: "
         << persona.sub_area_expertise << "\n\nConcept: " << report.concept_name
         << "\n\nResearch report:\n" << report.body << "\n";
    if (prior) user << "\nPrior round synthesis:\n" << synthesis_text(*prior);
    user << "\nRound " << round_index << ": propose observable phenomena.";
    request.messages = {{ChatRole::system, expert_persona_prompt()},
                        {ChatRole::user, user.str()}};
    json value = complete_checked(
        gateway, request,
        [](const json&) -> std::optional<std::string> { return std::nullopt; });
    Proposal p;
    p.persona_name = persona.name;
    p.round_index = round_index;
    for (const auto& ph : value.at("phenomena"))
      p.phenomena.push_back({ph.at("label"), ph.at("description"),
                             ph.at("theory"), ph.at("example")});
    proposals.push_back(std::move(p));
  }

  // Moderator: merge versus retain, accounting for every phenomenon once.
  std::set<PhenomenonRef> universe;
  std::ostringstream proposals_text;
  for (const Proposal& p : proposals) {
    proposals_text << p.persona_name << " proposes:\n";
    for (const Phenomenon& ph : p.phenomena) {
      universe.insert({p.persona_name, ph.label});
      proposals_text << "- " << ph.label << ": " << ph.description
                     << " (theory: " << ph.theory << "; example: " << ph.example
                     << ")\n";
    }
  }

  const RoleConfig mod_rc = config.role("moderator");
  ChatRequest request;
  request.model_id = mod_rc.model_id;
  request.temperature = mod_rc.temperature;
  request.output_schema = OutputSchema::object(
      {{"families",
        OutputSchema::array(
            OutputSchema::object(
                {{"label", OutputSchema::string(false)},
                 {"description", OutputSchema::string(false)},
                 {"merged_from",
                  OutputSchema::array(
                      OutputSchema::object({{"persona", OutputSchema::string(false)},
                                            {"phenomenon", OutputSchema::string(false)}}),
                      1)},
                 {"retained_distinct", OutputSchema::boolean()}}),
            1)}});
  std::ostringstream user;
  user << "Concept: " << report.concept_name << "\nRound " << round_index
       << " proposals:\n\n" << proposals_text.str()
       << "\nSynthesize into families. Reference every persona/phenomenon "
          "pair exactly once across all families.";
  request.messages = {{ChatRole::system, moderator_prompt()},
                      {ChatRole::user, user.str()}};

  json value = complete_checked(gateway, request, [&](const json& v) -> std::optional<std::string> {
    std::map<PhenomenonRef, int> counts;
    for (const auto& f : v.at("families"))
      for (const auto& m : f.at("merged_from"))
        ++counts[{m.at("persona").get<std::string>(),
                  m.at("phenomenon").get<std::string>()}];
    for (const PhenomenonRef& r : universe) {
      auto it = counts.find(r);
      if (it == counts.end())
        return "phenomenon not accounted for: " + r.persona_name + "/" +
               r.phenomenon_label;
      if (it->second > 1)
        return "phenomenon referenced more than once: " + r.persona_name + "/" +
               r.phenomenon_label;
    }
    for (const auto& [r, _] : counts)
      if (!universe.count(r))
        return "unknown phenomenon reference: " + r.persona_name + "/" +
               r.phenomenon_label;
    return std::nullopt;
  });

  ModeratorSynthesis synthesis;
  synthesis.round_index = round_index;
  for (const auto& f : value.at("families")) {
    PhenomenonFamily fam;
    fam.label = f.at("label");
    fam.description = f.at("description");
    fam.retained_distinct = f.at("retained_distinct");
    for (const auto& m : f.at("merged_from"))
      fam.merged_from.push_back({m.at("persona"), m.at("phenomenon")});
    synthesis.families.push_back(std::move(fam));
  }
  return {std::move(proposals), std::move(synthesis)};
}

ModeratorSynthesis run_delphi(Gateway& gateway,
                              const std::vector<ExpertPersona>& personas,
                              const ResearchReport& report, int rounds,
                              const RunConfig& config, RunStore* store) {
  if (rounds < 1) throw std::invalid_argument("delphi rounds must be >= 1");
  if (personas.empty()) throw std::invalid_argument("persona list is empty");
  std::optional<ModeratorSynthesis> prior;
  for (int r = 1; r <= rounds; ++r) {
    auto [proposals, synthesis] =
        run_delphi_round(gateway, personas, prior, report, r, config);
    if (store) {
      const std::string dir = "round_" + std::to_string(r);
      json pj = json::array();
      for (const Proposal& p : proposals) pj.push_back(proposal_to_json(p));
      store->put_artifact(dir + "_proposals", "proposals", dir + "/proposals.json",
                          pj.dump(2) + "\n");
      store->put_artifact(dir + "_synthesis", "synthesis", dir + "/synthesis.json",
                          synthesis_to_json(synthesis).dump(2) + "\n");
    }
    prior = std::move(synthesis);
  }
  return *prior;
}

ConceptSpec synthesize_spec(Gateway& gateway, const ResearchReport& report,
                            const ModeratorSynthesis& final_synthesis,
                            const std::optional<ConceptSpec>& prior_draft,
                            const std::optional<DraftCritique>& prior_critique,
                            const RunConfig& config) {
  const RoleConfig rc = config.role("synthesizer");
  ChatRequest request;
  request.model_id = rc.model_id;
  request.temperature = rc.temperature;
  request.output_schema = concept_spec_output_schema();

  std::ostringstream user;
  user << "Concept: " << report.concept_name << "\n\nResearch report:\n"
       << report.body << "\n\nFinal expert synthesis:\n"
       << synthesis_text(final_synthesis) << "\n";
  if (prior_draft)
    user << "\nPrior draft:\n" << serialize_spec(*prior_draft).dump(2) << "\n";
  if (prior_critique) {
    user << "\nValidator critique of the prior draft (address it):\n"
         << assessment_to_json(prior_critique->assessment).dump(2) << "\n"
         << prior_critique->feedback << "\n";
  }
  user << "\nDraft the concept spec now. " << concept_spec_schema_description();
  request.messages = {{ChatRole::system,
                       systematization_primer() + "\n\n" + synthesizer_prompt()},
                      {ChatRole::user, user.str()}};

  json value = complete_checked(gateway, request, [](const json& v) -> std::optional<std::string> {
    try {
      ConceptSpec spec = parse_spec(v);
      for (const Finding& f : validate_spec(spec))
        if (f.severity == Severity::error) return f.path + ": " + f.message;
    } catch (const SpecParseError& e) {
      return std::string(e.what());
    }
    return std::nullopt;
  });

  ConceptSpec spec = parse_spec(value);
  spec.metadata.generator = "multi";
  spec.metadata.model_id = rc.model_id;
  spec.metadata.timestamp = iso_timestamp();
  return spec;
}

DraftCritique validate_draft(Gateway& gateway, const ConceptSpec& draft,
                             const ResearchReport& report,
                             const ModeratorSynthesis& final_synthesis,
                             int draft_index, const RunConfig& config) {
  const RoleConfig rc = config.role("validator");
  ChatRequest request;
  request.model_id = rc.model_id;
  request.temperature = rc.temperature;

  std::vector<std::pair<std::string, OutputSchema>> score_fields;
  for (WorksheetAttribute a : kAllAttributes)
    score_fields.push_back({to_string(a), OutputSchema::integer()});
  request.output_schema = OutputSchema::object(
      {{"responses",
        OutputSchema::array(
            OutputSchema::object({{"attribute", OutputSchema::string(false)},
                                  {"question_id", OutputSchema::string(false)},
                                  {"answer_text", OutputSchema::string(false)}}),
            1)},
       {"scores", OutputSchema::object(std::move(score_fields))},
       {"feedback", OutputSchema::string(false)}});

  std::ostringstream user;
  user << "Draft concept spec (draft " << draft_index << "):\n"
       << serialize_spec(draft).dump(2)
       << "\n\nProcess artifacts to consider:\n\nResearch report:\n"
       << report.body << "\n\nFinal expert synthesis:\n"
       << synthesis_text(final_synthesis)
       << "\nScore all six attributes and give feedback.";
  request.messages = {{ChatRole::system, validator_prompt(config.bank)},
                      {ChatRole::user, user.str()}};

  json value = complete_checked(gateway, request, [](const json& v) -> std::optional<std::string> {
    for (const auto& [attr, score] : v.at("scores").items()) {
      int s = score.get<int>();
      if (s < 1 || s > 5)
        return "score for " + attr + " outside 1-5: " + std::to_string(s);
    }
    for (const auto& r : v.at("responses")) {
      try {
        attribute_from_string(r.at("attribute").get<std::string>());
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
    }
    return std::nullopt;
  });

  DraftCritique critique;
  critique.draft_index = draft_index;
  critique.feedback = value.at("feedback");
  critique.assessment.target = "draft_" + std::to_string(draft_index);
  critique.assessment.assessor = rc.model_id;
  for (const auto& r : value.at("responses"))
    critique.assessment.responses[attribute_from_string(r.at("attribute"))]
        .push_back({r.at("question_id"), r.at("answer_text")});
  for (WorksheetAttribute a : kAllAttributes)
    critique.assessment.scores[a] =
        AttributeScore{value.at("scores").at(to_string(a)).get<int>()};
  return critique;
}

MultiAgentResult systematize_multi(Gateway& gateway, const ConceptBrief& brief,
                                   const RunConfig& config,
                                   const std::filesystem::path& run_dir) {
  config.check();
  RunStore store = RunStore::open_run(run_dir, brief.concept_name, "multi",
                                      config.snapshot());
  gateway.set_transcript_sink(
      [&store](const json& record) { store.append_transcript(record); });

  try {
    // Phase 1: contextualization.
    ResearchReport report = contextualize(gateway, brief, config);
    store.put_artifact("report", "report", "report.md", report.body);

    // Phase 2: simulated expert discussion.
    std::vector<ExpertPersona> personas =
        select_panel(gateway, brief, report, config);
    json panel = json::array();
    for (const ExpertPersona& p : personas)
      panel.push_back({{"name", p.name},
                       {"general_expertise", p.general_expertise},
                       {"sub_area_expertise", p.sub_area_expertise}});
    store.put_artifact("panel", "panel", "panel.json", panel.dump(2) + "\n");

    ModeratorSynthesis final_synthesis = run_delphi(
        gateway, personas, report, config.delphi_rounds, config, &store);

    // Phase 3: synthesizer / validator refinement loop.
    std::optional<ConceptSpec> draft;
    std::optional<DraftCritique> critique;
    int k = 0;
    while (k < config.max_spec_rounds) {
      ++k;
      ConceptSpec next = synthesize_spec(gateway, report, final_synthesis,
                                         draft, critique, config);
      draft = std::move(next);
      const std::string dir = "draft_" + std::to_string(k);
      store.put_artifact(dir + "_spec", "draft", dir + "/spec.json",
                         serialize_spec(*draft).dump(2) + "\n");
      DraftCritique c =
          validate_draft(gateway, *draft, report, final_synthesis, k, config);
      critique = c;
      json cj = assessment_to_json(c.assessment);
      cj["draft_index"] = c.draft_index;
      cj["feedback"] = c.feedback;
      store.put_artifact(dir + "_critique", "critique", dir + "/critique.json",
                         cj.dump(2) + "\n");

      bool all_pass = true;
      for (WorksheetAttribute a : kAllAttributes) {
        const AttributeScore& s = c.assessment.scores.at(a);
        if (!s.value || *s.value < config.score_threshold) all_pass = false;
      }
      if (all_pass) break;
    }

    store.set_status(RunStatus::complete);
    MultiAgentResult result;
    result.spec = *draft;
    result.manifest = store.manifest();
    result.final_assessment = critique->assessment;
    result.spec_rounds_used = k;
    return result;
  } catch (...) {
    store.set_status(RunStatus::failed);
    throw;
  }
}

}  // namespace consys
