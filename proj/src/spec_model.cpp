#include "consys/spec_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace consys {

namespace {

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SpecParseError(path, "expected an object");
}

void require_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SpecParseError(path, "expected an array");
}

// Unknown fields are errors, not warnings: generator drift must surface loudly.
void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key))
      throw SpecParseError(path, "unknown field \"" + key + "\"");
  }
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& path) {
  if (!j.contains(key)) throw SpecParseError(path, "missing field \"" + key + "\"");
  if (!j.at(key).is_string())
    throw SpecParseError(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

std::string elem_path(const std::string& base, const std::string& key, size_t i) {
  return base.empty() ? key + "[" + std::to_string(i) + "]"
                      : base + "." + key + "[" + std::to_string(i) + "]";
}

Slot parse_slot(const json& j, const std::string& path, int depth);

std::vector<Slot> parse_slots(const json& j, const std::string& path, int depth) {
  require_array(j, path);
  std::vector<Slot> slots;
  for (size_t i = 0; i < j.size(); ++i)
    slots.push_back(parse_slot(j[i], path + "[" + std::to_string(i) + "]", depth));
  return slots;
}

Slot parse_slot(const json& j, const std::string& path, int depth) {
  if (depth > 32) throw SpecParseError(path, "slot nesting too deep");
  require_object(j, path);
  check_keys(j, path, {"name", "definition", "topology", "values", "children"});
  Slot slot;
  slot.name = get_string(j, "name", path);
  if (slot.name.empty()) throw SpecParseError(path + ".name", "empty slot name");
  if (slot.name.find('|') != std::string::npos)
    throw SpecParseError(path + ".name", "slot name may not contain '|'");
  slot.definition = get_string(j, "definition", path);
  if (j.contains("topology")) {
    const std::string t = get_string(j, "topology", path);
    try {
      slot.topology = slot_topology_from_string(t);
    } catch (const std::exception&) {
      throw SpecParseError(path + ".topology", "unknown topology \"" + t + "\"");
    }
  }
  const bool has_values = j.contains("values") && !j.at("values").empty();
  const bool has_children = j.contains("children") && !j.at("children").empty();
  if (has_values && has_children)
    throw SpecParseError(path, "slot has both values and children");
  if (!has_values && !has_children)
    throw SpecParseError(path, "slot has neither values nor children");
  if (has_values) {
    const json& vals = j.at("values");
    require_array(vals, path + ".values");
    for (size_t i = 0; i < vals.size(); ++i) {
      const std::string vpath = path + ".values[" + std::to_string(i) + "]";
      require_object(vals[i], vpath);
      check_keys(vals[i], vpath, {"name", "definition"});
      SlotValue v;
      v.name = get_string(vals[i], "name", vpath);
      if (v.name.find('|') != std::string::npos)
        throw SpecParseError(vpath + ".name", "value name may not contain '|'");
      v.definition = get_string(vals[i], "definition", vpath);
      slot.values.push_back(std::move(v));
    }
  } else {
    slot.children = parse_slots(j.at("children"), path + ".children", depth + 1);
  }
  return slot;
}

void collect_slot_names(const Slot& slot, std::vector<std::string>& out) {
  out.push_back(slot.name);
  for (const Slot& c : slot.children) collect_slot_names(c, out);
}

void enumerate_slot(const std::string& pattern_id, const Slot& slot,
                    std::vector<std::string> path_so_far,
                    std::vector<SlotValueId>& out) {
  path_so_far.push_back(slot.name);
  for (const SlotValue& v : slot.values)
    out.push_back(SlotValueId{pattern_id, path_so_far, v.name});
  for (const Slot& c : slot.children)
    enumerate_slot(pattern_id, c, path_so_far, out);
}

void validate_slot(const Slot& slot, const std::string& path,
                   std::vector<Finding>& findings) {
  if (slot.definition.empty())
    findings.push_back({Severity::error, path + ".definition", "empty slot definition"});
  std::set<std::string> seen;
  for (size_t i = 0; i < slot.values.size(); ++i) {
    const std::string vpath = path + ".values[" + std::to_string(i) + "]";
    const SlotValue& v = slot.values[i];
    if (v.name.empty())
      findings.push_back({Severity::error, vpath + ".name", "empty value name"});
    if (v.definition.empty())
      findings.push_back({Severity::error, vpath + ".definition",
                          "empty definition for value \"" + v.name + "\""});
    if (!seen.insert(v.name).second)
      findings.push_back({Severity::error, vpath + ".name",
                          "duplicate value name \"" + v.name + "\""});
  }
  for (size_t i = 0; i < slot.children.size(); ++i)
    validate_slot(slot.children[i], path + ".children[" + std::to_string(i) + "]",
                  findings);
}

json serialize_slot(const Slot& slot) {
  json j;
  j["name"] = slot.name;
  j["definition"] = slot.definition;
  j["topology"] = to_string(slot.topology);
  if (!slot.values.empty()) {
    json vals = json::array();
    for (const SlotValue& v : slot.values)
      vals.push_back({{"name", v.name}, {"definition", v.definition}});
    j["values"] = std::move(vals);
  } else {
    json kids = json::array();
    for (const Slot& c : slot.children) kids.push_back(serialize_slot(c));
    j["children"] = std::move(kids);
  }
  return j;
}

}  // namespace

std::string to_string(SlotTopology t) {
  return t == SlotTopology::single_choice ? "single_choice" : "multi_label";
}

SlotTopology slot_topology_from_string(const std::string& s) {
  if (s == "single_choice") return SlotTopology::single_choice;
  if (s == "multi_label") return SlotTopology::multi_label;
  throw std::invalid_argument("unknown topology: " + s);
}

std::string SlotValueId::label() const {
  std::string out = pattern_id;
  for (const auto& s : slot_path) out += "|" + s;
  return out + "|" + value_name;
}

std::vector<std::string> template_placeholders(const std::string& t) {
  std::vector<std::string> out;
  size_t pos = 0;
  while ((pos = t.find('[', pos)) != std::string::npos) {
    const size_t end = t.find(']', pos + 1);
    if (end == std::string::npos) break;
    const std::string token = t.substr(pos + 1, end - pos - 1);
    // Placeholders are uppercase tokens; anything else is literal brackets.
    const bool token_like =
        !token.empty() &&
        std::all_of(token.begin(), token.end(), [](unsigned char c) {
          return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        });
    if (token_like) out.push_back(token);
    pos = end + 1;
  }
  return out;
}

ConceptSpec parse_spec(const json& document) {
  require_object(document, "");
  check_keys(document, "",
             {"concept_name", "concept_brief", "patterns", "metadata"});
  ConceptSpec spec;
  spec.concept_name = get_string(document, "concept_name", "");
  spec.concept_brief = get_string(document, "concept_brief", "");
  if (!document.contains("patterns"))
    throw SpecParseError("", "missing field \"patterns\"");
  const json& patterns = document.at("patterns");
  require_array(patterns, "patterns");
  if (patterns.empty())
    throw SpecParseError("patterns", "spec has zero patterns");
  std::set<std::string> pattern_ids;
  for (size_t i = 0; i < patterns.size(); ++i) {
    const std::string ppath = "patterns[" + std::to_string(i) + "]";
    const json& pj = patterns[i];
    require_object(pj, ppath);
    check_keys(pj, ppath, {"id", "template", "key_terms", "slots", "theories"});
    Pattern p;
    p.id = get_string(pj, "id", ppath);
    if (!pattern_ids.insert(p.id).second)
      throw SpecParseError(ppath + ".id", "duplicate pattern id \"" + p.id + "\"");
    p.template_text = get_string(pj, "template", ppath);
    if (pj.contains("key_terms")) {
      require_array(pj.at("key_terms"), ppath + ".key_terms");
      for (size_t k = 0; k < pj.at("key_terms").size(); ++k) {
        const std::string kpath = ppath + ".key_terms[" + std::to_string(k) + "]";
        require_object(pj.at("key_terms")[k], kpath);
        check_keys(pj.at("key_terms")[k], kpath, {"term", "definition"});
        p.key_terms.push_back({get_string(pj.at("key_terms")[k], "term", kpath),
                               get_string(pj.at("key_terms")[k], "definition", kpath)});
      }
    }
    if (!pj.contains("slots"))
      throw SpecParseError(ppath, "missing field \"slots\"");
    p.slots = parse_slots(pj.at("slots"), ppath + ".slots", 0);
    if (!pj.contains("theories"))
      throw SpecParseError(ppath, "missing field \"theories\"");
    require_array(pj.at("theories"), ppath + ".theories");
    for (size_t t = 0; t < pj.at("theories").size(); ++t) {
      const std::string tpath = ppath + ".theories[" + std::to_string(t) + "]";
      const json& tj = pj.at("theories")[t];
      require_object(tj, tpath);
      check_keys(tj, tpath, {"citation", "anchor"});
      TheoryRef ref;
      ref.citation = get_string(tj, "citation", tpath);
      if (tj.contains("anchor")) {
        require_object(tj.at("anchor"), tpath + ".anchor");
        check_keys(tj.at("anchor"), tpath + ".anchor", {"artifact_id", "location"});
        ref.anchor = ArtifactAnchor{
            get_string(tj.at("anchor"), "artifact_id", tpath + ".anchor"),
            get_string(tj.at("anchor"), "location", tpath + ".anchor")};
      }
      p.theories.push_back(std::move(ref));
    }
    if (p.theories.empty())
      throw SpecParseError(ppath + ".theories",
                           "pattern \"" + p.id + "\" has no theory references");

    // Placeholder <-> slot cross-checks.
    std::vector<std::string> slot_names;
    for (const Slot& s : p.slots) collect_slot_names(s, slot_names);
    std::set<std::string> name_set(slot_names.begin(), slot_names.end());
    if (name_set.size() != slot_names.size())
      throw SpecParseError(ppath + ".slots", "duplicate slot name in pattern \"" +
                                                 p.id + "\"");
    for (const std::string& ph : template_placeholders(p.template_text)) {
      if (!name_set.count(ph))
        throw SpecParseError(ppath + ".template",
                             "pattern \"" + p.id + "\" references placeholder [" +
                                 ph + "] with no matching slot");
    }
    std::set<std::string> referenced;
    for (const std::string& ph : template_placeholders(p.template_text))
      referenced.insert(ph);
    for (const Slot& top : p.slots) {
      if (!referenced.count(top.name))
        throw SpecParseError(
            ppath + ".slots",
            "slot \"" + top.name + "\" is never referenced by the template");
    }
    spec.patterns.push_back(std::move(p));
  }
  if (document.contains("metadata")) {
    const json& mj = document.at("metadata");
    require_object(mj, "metadata");
    check_keys(mj, "metadata", {"generator", "model_id", "timestamp"});
    spec.metadata.generator = mj.value("generator", "");
    spec.metadata.model_id = mj.value("model_id", "");
    spec.metadata.timestamp = mj.value("timestamp", "");
  }
  return spec;
}

ConceptSpec parse_spec_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecParseError("", std::string("malformed document: ") + e.what());
  }
  return parse_spec(doc);
}

json serialize_spec(const ConceptSpec& spec) {
  json j;
  j["concept_name"] = spec.concept_name;
  j["concept_brief"] = spec.concept_brief;
  json patterns = json::array();
  for (const Pattern& p : spec.patterns) {
    json pj;
    pj["id"] = p.id;
    pj["template"] = p.template_text;
    json terms = json::array();
    for (const KeyTerm& k : p.key_terms)
      terms.push_back({{"term", k.term}, {"definition", k.definition}});
    pj["key_terms"] = std::move(terms);
    json slots = json::array();
    for (const Slot& s : p.slots) slots.push_back(serialize_slot(s));
    pj["slots"] = std::move(slots);
    json theories = json::array();
    for (const TheoryRef& t : p.theories) {
      json tj{{"citation", t.citation}};
      if (t.anchor)
        tj["anchor"] = {{"artifact_id", t.anchor->artifact_id},
                        {"location", t.anchor->location}};
      theories.push_back(std::move(tj));
    }
    pj["theories"] = std::move(theories);
    patterns.push_back(std::move(pj));
  }
  j["patterns"] = std::move(patterns);
  j["metadata"] = {{"generator", spec.metadata.generator},
                   {"model_id", spec.metadata.model_id},
                   {"timestamp", spec.metadata.timestamp}};
  return j;
}

std::vector<Finding> validate_spec(const ConceptSpec& spec) {
  std::vector<Finding> findings;
  if (spec.patterns.empty())
    findings.push_back({Severity::error, "patterns", "spec has zero patterns"});
  std::set<std::string> pattern_ids;
  for (size_t i = 0; i < spec.patterns.size(); ++i) {
    const Pattern& p = spec.patterns[i];
    const std::string ppath = "patterns[" + std::to_string(i) + "]";
    if (!pattern_ids.insert(p.id).second)
      findings.push_back({Severity::error, ppath + ".id",
                          "duplicate pattern id \"" + p.id + "\""});
    if (p.template_text.empty())
      findings.push_back({Severity::error, ppath + ".template", "empty template"});
    if (p.theories.empty())
      findings.push_back({Severity::error, ppath + ".theories",
                          "pattern has no theory references"});
    for (size_t t = 0; t < p.theories.size(); ++t)
      if (p.theories[t].citation.empty())
        findings.push_back({Severity::error,
                            ppath + ".theories[" + std::to_string(t) + "].citation",
                            "empty citation"});
    for (size_t k = 0; k < p.key_terms.size(); ++k) {
      const std::string kpath = ppath + ".key_terms[" + std::to_string(k) + "]";
      if (p.key_terms[k].term.empty())
        findings.push_back({Severity::error, kpath + ".term", "empty key term"});
      if (p.key_terms[k].definition.empty())
        findings.push_back({Severity::error, kpath + ".definition",
                            "empty key-term definition"});
    }
    std::vector<std::string> slot_names;
    for (const Slot& s : p.slots) collect_slot_names(s, slot_names);
    std::set<std::string> name_set(slot_names.begin(), slot_names.end());
    for (const std::string& ph : template_placeholders(p.template_text))
      if (!name_set.count(ph))
        findings.push_back({Severity::error, ppath + ".template",
                            "unresolved placeholder [" + ph + "]"});
    for (size_t s = 0; s < p.slots.size(); ++s)
      validate_slot(p.slots[s], ppath + ".slots[" + std::to_string(s) + "]",
                    findings);
  }
  return findings;
}

std::vector<SlotValueId> enumerate_slot_values(const ConceptSpec& spec) {
  std::vector<SlotValueId> out;
  for (const Pattern& p : spec.patterns)
    for (const Slot& s : p.slots) enumerate_slot(p.id, s, {}, out);
  return out;
}

std::string spec_hash(const ConceptSpec& spec) {
  const std::string canonical = serialize_spec(spec).dump();
  uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace consys
