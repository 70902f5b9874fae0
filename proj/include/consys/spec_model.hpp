#ifndef CONSYS_SPEC_MODEL_HPP
#define CONSYS_SPEC_MODEL_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace consys {

using json = nlohmann::json;

/// Thrown when a concept-spec document cannot be parsed into a valid spec.
/// `path` points at the offending element, e.g. "patterns[0].slots[1]".
class SpecParseError : public std::runtime_error {
public:
  SpecParseError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

enum class SlotTopology { single_choice, multi_label };

std::string to_string(SlotTopology t);
SlotTopology slot_topology_from_string(const std::string& s);

struct SlotValue {
  std::string name;
  std::string definition;  // inclusion/exclusion criteria or examples
  bool operator==(const SlotValue&) const = default;
};

struct Slot {
  std::string name;  // uppercase token, referenced from the template as [NAME]
  std::string definition;
  SlotTopology topology = SlotTopology::multi_label;
  std::vector<SlotValue> values;  // exactly one of values/children non-empty
  std::vector<Slot> children;
  bool operator==(const Slot&) const = default;
};

struct KeyTerm {
  std::string term;
  std::string definition;
  bool operator==(const KeyTerm&) const = default;
};

/// Optional pointer from a theory reference into a stored process artifact.
struct ArtifactAnchor {
  std::string artifact_id;
  std::string location;  // artifact-specific, e.g. a section heading
  bool operator==(const ArtifactAnchor&) const = default;
};

struct TheoryRef {
  std::string citation;
  std::optional<ArtifactAnchor> anchor;
  bool operator==(const TheoryRef&) const = default;
};

struct Pattern {
  std::string id;
  std::string template_text;  // phrase with [SLOT_NAME] placeholders
  std::vector<KeyTerm> key_terms;
  std::vector<Slot> slots;
  std::vector<TheoryRef> theories;
  bool operator==(const Pattern&) const = default;
};

struct SpecMetadata {
  std::string generator;  // "direct", "multi", "manual", ...
  std::string model_id;
  std::string timestamp;
  bool operator==(const SpecMetadata&) const = default;
};

struct ConceptSpec {
  std::string concept_name;
  std::string concept_brief;
  std::vector<Pattern> patterns;
  SpecMetadata metadata;
  bool operator==(const ConceptSpec&) const = default;
};

enum class Severity { error, warning };

struct Finding {
  Severity severity = Severity::error;
  std::string path;
  std::string message;
};

/// Identifies one leaf slot value: pattern id + slot path + value name.
struct SlotValueId {
  std::string pattern_id;
  std::vector<std::string> slot_path;  // outermost slot first
  std::string value_name;
  bool operator==(const SlotValueId&) const = default;

  /// Display label "pattern|SLOT|...|value". Slot names cannot contain '|'
  /// (enforced at parse time), value names may not either.
  std::string label() const;
};

ConceptSpec parse_spec(const json& document);
ConceptSpec parse_spec_text(const std::string& text);
json serialize_spec(const ConceptSpec& spec);

/// Machine-checkable findings; empty iff all structural invariants hold.
std::vector<Finding> validate_spec(const ConceptSpec& spec);

/// Depth-first flattening of every leaf slot value across all patterns.
std::vector<SlotValueId> enumerate_slot_values(const ConceptSpec& spec);

/// Slot placeholders appearing in a template, in order of appearance.
std::vector<std::string> template_placeholders(const std::string& template_text);

/// Content hash of the canonical serialization (FNV-1a 64, hex).
std::string spec_hash(const ConceptSpec& spec);

}  // namespace consys

#endif
