#include "consys/direct_systematizer.hpp"

#include <chrono>
#include <ctime>
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

// JSON-level shape; the placeholder/slot cross-invariants are checked by
// parse_spec after the reply conforms.
OutputSchema slot_schema(int depth) {
  // values XOR children is enforced by parse_spec; both are schema-optional.
  std::vector<std::pair<std::string, OutputSchema>> fields{
      {"name", OutputSchema::string(false)},
      {"definition", OutputSchema::string(false)},
      {"topology", OutputSchema::string_enum({"single_choice", "multi_label"})},
      {"values",
       OutputSchema::array(OutputSchema::object(
           {{"name", OutputSchema::string(false)},
            {"definition", OutputSchema::string(false)}}))},
  };
  std::vector<std::string> optional{"values", "topology"};
  if (depth > 0) {
    fields.push_back({"children", OutputSchema::array(slot_schema(depth - 1))});
    optional.push_back("children");
  }
  return OutputSchema::object(std::move(fields), std::move(optional));
}

}  // namespace

OutputSchema concept_spec_output_schema() {
  // Nested slots are allowed three levels deep in structured replies; the
  // parser itself accepts deeper nesting from files.
  return OutputSchema::object({
      {"concept_name", OutputSchema::string(false)},
      {"concept_brief", OutputSchema::string(false)},
      {"patterns",
       OutputSchema::array(
           OutputSchema::object({
               {"id", OutputSchema::string(false)},
               {"template", OutputSchema::string(false)},
               {"key_terms",
                OutputSchema::array(OutputSchema::object(
                    {{"term", OutputSchema::string(false)},
                     {"definition", OutputSchema::string(false)}}))},
               {"slots", OutputSchema::array(slot_schema(3), 1)},
               {"theories",
                OutputSchema::array(
                    OutputSchema::object(
                        {{"citation", OutputSchema::string(false)},
                         {"anchor",
                          OutputSchema::object(
                              {{"artifact_id", OutputSchema::string(false)},
                               {"location", OutputSchema::string()}})}},
                        {"anchor"}),
                    1)},
           }),
           1)},
  });
}

ConceptSpec systematize_direct(Gateway& gateway, const ConceptBrief& brief,
                               const DirectOptions& options) {
  if (brief.description.empty())
    throw std::invalid_argument("concept brief has an empty description");

  std::ostringstream system;
  system << systematization_primer() << "\n\n"
         << worksheet_criteria_text(options.bank) << "\n"
         << concept_spec_schema_description();

  std::ostringstream user;
  user << "Systematize the concept of " << brief.concept_name << ".\n"
       << brief.description << "\n";
  if (!brief.context.empty()) user << "Context of use: " << brief.context << "\n";
  user << "Reply with the concept spec JSON only.";

  ChatRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.output_schema = concept_spec_output_schema();
  request.messages = {{ChatRole::system, system.str()},
                      {ChatRole::user, user.str()}};

  // One primary call; one repair covers schema or spec-invariant failure.
  TranscriptRecord record = gateway.complete(request);
  auto try_parse = [&](const std::string& text,
                       std::string& error) -> std::optional<ConceptSpec> {
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
    try {
      ConceptSpec spec = parse_spec(value);
      auto findings = validate_spec(spec);
      for (const Finding& f : findings)
        if (f.severity == Severity::error) {
          error = f.path + ": " + f.message;
          return std::nullopt;
        }
      return spec;
    } catch (const SpecParseError& e) {
      error = e.what();
      return std::nullopt;
    }
  };

  std::string error;
  std::optional<ConceptSpec> spec = try_parse(record.response_text, error);
  if (!spec) {
    ChatRequest repair = request;
    repair.messages.push_back({ChatRole::assistant, record.response_text});
    repair.messages.push_back(
        {ChatRole::user,
         "Your concept spec was invalid: " + error +
             "\nReply again with a corrected concept spec JSON only."});
    TranscriptRecord second = gateway.complete(repair);
    spec = try_parse(second.response_text, error);
    if (!spec)
      throw GatewayError(GatewayErrorKind::schema,
                         "direct systematizer: spec invalid after repair: " +
                             error);
  }

  spec->metadata.generator = "direct";
  spec->metadata.model_id = options.model_id;
  spec->metadata.timestamp = iso_timestamp();
  return *spec;
}

}  // namespace consys
