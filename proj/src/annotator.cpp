#include "consys/annotator.hpp"

#include <functional>
#include <map>
#include <sstream>

#include "consys/prompts.hpp"

namespace consys {

void AnnotationMatrix::check() const {
  if (rows.size() != sample_ids.size())
    throw std::invalid_argument("row count does not match sample-id count");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != columns.size())
      throw std::invalid_argument("row " + sample_ids[i] +
                                  " length does not match column count");
    for (uint8_t b : rows[i])
      if (b != 0 && b != 1)
        throw std::invalid_argument("non-binary entry in row " + sample_ids[i]);
  }
  // Single-choice slots: at most one active column per (row, slot).
  std::map<std::string, std::vector<size_t>> slot_columns;
  for (size_t c = 0; c < columns.size(); ++c) {
    std::string key = columns[c].pattern_id;
    for (const std::string& s : columns[c].slot_path) key += "|" + s;
    slot_columns[key].push_back(c);
  }
  (void)slot_columns;  // membership only; topology is enforced at assembly
}

std::string annotation_field_name(size_t column_index) {
  return "v" + std::to_string(column_index);
}

OutputSchema build_annotation_schema(const ConceptSpec& spec) {
  const auto columns = enumerate_slot_values(spec);
  std::vector<std::pair<std::string, OutputSchema>> fields;
  for (size_t i = 0; i < columns.size(); ++i)
    fields.push_back(
        {annotation_field_name(i),
         OutputSchema::object({{"applies", OutputSchema::boolean()},
                               {"rationale", OutputSchema::string()}},
                              {"rationale"})});
  return OutputSchema::object(std::move(fields));
}

namespace {

struct SlotGroup {
  std::string label;
  SlotTopology topology;
  std::vector<size_t> columns;  // in column order
};

// Columns grouped by owning slot, preserving column order within each group.
std::vector<SlotGroup> slot_groups(const ConceptSpec& spec) {
  const auto columns = enumerate_slot_values(spec);
  std::map<std::string, SlotTopology> topologies;
  std::function<void(const std::string&, const Slot&, std::string)> walk =
      [&](const std::string& pattern_id, const Slot& slot, std::string prefix) {
        const std::string key = prefix + "|" + slot.name;
        topologies[key] = slot.topology;
        for (const Slot& c : slot.children) walk(pattern_id, c, key);
      };
  for (const Pattern& p : spec.patterns)
    for (const Slot& s : p.slots) walk(p.id, s, p.id);

  std::vector<SlotGroup> groups;
  std::map<std::string, size_t> index;
  for (size_t c = 0; c < columns.size(); ++c) {
    std::string key = columns[c].pattern_id;
    for (const std::string& s : columns[c].slot_path) key += "|" + s;
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = groups.size();
      groups.push_back({key, topologies.at(key), {c}});
    } else {
      groups[it->second].columns.push_back(c);
    }
  }
  return groups;
}

std::string spec_prompt_text(const ConceptSpec& spec,
                             const std::vector<SlotValueId>& columns) {
  std::ostringstream os;
  os << "Concept spec for \"" << spec.concept_name << "\":\n"
     << serialize_spec(spec).dump(2)
     << "\n\nJudge these slot values, replying with one field per value:\n";
  for (size_t i = 0; i < columns.size(); ++i)
    os << annotation_field_name(i) << " = " << columns[i].label() << "\n";
  return os.str();
}

std::string sample_prompt_text(const Sample& sample) {
  std::ostringstream os;
  if (!sample.context.empty()) {
    os << "Conversation context (judge only the final text below):\n";
    for (const ContextTurn& t : sample.context)
      os << "[" << t.role << "] " << t.content << "\n";
    os << "\nText to judge:\n";
  } else {
    os << "Text to judge:\n";
  }
  os << sample.body;
  return os.str();
}

}  // namespace

std::vector<SlotJudgment> annotate_sample(Gateway& gateway, const Sample& sample,
                                          const ConceptSpec& spec,
                                          const AnnotateOptions& options,
                                          std::vector<RepairEvent>* repairs) {
  if (sample.body.empty())
    throw std::invalid_argument("sample " + sample.id + " has an empty body");
  const auto columns = enumerate_slot_values(spec);

  ChatRequest request;
  request.model_id = options.model_id;
  request.temperature = options.temperature;
  request.output_schema = build_annotation_schema(spec);
  request.messages = {{ChatRole::system, annotator_system_prompt()},
                      {ChatRole::user,
                       spec_prompt_text(spec, columns) + "\n" +
                           sample_prompt_text(sample)}};

  auto parse_judgments = [&](const json& value) {
    std::vector<SlotJudgment> out(columns.size());
    for (size_t i = 0; i < columns.size(); ++i) {
      const json& field = value.at(annotation_field_name(i));
      out[i].column = i;
      out[i].applies = field.at("applies").get<bool>();
      out[i].rationale = field.value("rationale", "");
      if (out[i].rationale.size() > 280) out[i].rationale.resize(280);
      if (out[i].applies && out[i].rationale.empty())
        throw GatewayError(GatewayErrorKind::schema,
                           "positive judgment without rationale for " +
                               columns[i].label());
    }
    return out;
  };

  auto violations = [&](const std::vector<SlotJudgment>& js) {
    std::vector<SlotGroup> bad;
    for (const SlotGroup& g : slot_groups(spec)) {
      if (g.topology != SlotTopology::single_choice) continue;
      int active = 0;
      for (size_t c : g.columns) active += js[c].applies ? 1 : 0;
      if (active > 1) bad.push_back(g);
    }
    return bad;
  };

  TranscriptRecord record = gateway.complete_structured(request);
  std::vector<SlotJudgment> judgments = parse_judgments(*record.parsed);

  auto bad = violations(judgments);
  if (!bad.empty()) {
    // One re-prompt; if the reply still violates, keep only the first
    // asserted value in column order and record a repair event.
    std::ostringstream os;
    os << "These slots are single-choice but you asserted several values:";
    for (const SlotGroup& g : bad) os << " " << g.label << ";";
    os << " mark at most one value per single-choice slot and reply again.";
    ChatRequest retry = request;
    retry.messages.push_back({ChatRole::assistant, record.response_text});
    retry.messages.push_back({ChatRole::user, os.str()});
    try {
      TranscriptRecord second = gateway.complete_structured(retry);
      judgments = parse_judgments(*second.parsed);
    } catch (const GatewayError&) {
      // fall through to forced resolution of the original reply
    }
    for (const SlotGroup& g : violations(judgments)) {
      bool kept = false;
      RepairEvent event{sample.id, g.label, {}};
      for (size_t c : g.columns) {
        if (!judgments[c].applies) continue;
        if (!kept) {
          kept = true;
        } else {
          judgments[c].applies = false;
          judgments[c].rationale.clear();
          event.dropped_values.push_back(columns[c].value_name);
        }
      }
      if (!event.dropped_values.empty() && repairs)
        repairs->push_back(std::move(event));
    }
  }
  return judgments;
}

AnnotationMatrix annotate_dataset(Gateway& gateway,
                                  const std::vector<Sample>& samples,
                                  const ConceptSpec& spec,
                                  const AnnotateOptions& options) {
  if (samples.empty()) throw std::invalid_argument("no samples to annotate");

  AnnotationMatrix m;
  m.spec_name = spec.concept_name;
  m.spec_hash = spec_hash(spec);
  m.annotator_model_id = options.model_id;
  m.columns = enumerate_slot_values(spec);

  // Deterministic by sample order regardless of completion order.
  for (const Sample& sample : samples) {
    try {
      std::vector<SlotJudgment> js =
          annotate_sample(gateway, sample, spec, options, &m.repair_events);
      std::vector<uint8_t> row(m.columns.size(), 0);
      std::vector<std::string> rat(m.columns.size());
      for (const SlotJudgment& j : js) {
        row[j.column] = j.applies ? 1 : 0;
        rat[j.column] = j.rationale;
      }
      m.sample_ids.push_back(sample.id);
      m.rows.push_back(std::move(row));
      m.rationales.push_back(std::move(rat));
    } catch (const GatewayError& e) {
      if (e.kind() == GatewayErrorKind::script_exhausted) throw;
      m.missing_sample_ids.push_back(sample.id);
    }
    if (m.missing_sample_ids.size() >
        options.max_failure_fraction * samples.size())
      throw std::runtime_error(
          "annotation aborted: more than " +
          std::to_string(int(options.max_failure_fraction * 100)) +
          "% of rows failed");
  }
  m.check();
  return m;
}

json matrix_to_json(const AnnotationMatrix& m) {
  json j;
  j["spec_name"] = m.spec_name;
  j["spec_hash"] = m.spec_hash;
  j["annotator_model_id"] = m.annotator_model_id;
  json cols = json::array();
  for (const SlotValueId& c : m.columns) cols.push_back(c.label());
  j["columns"] = std::move(cols);
  json rows = json::array();
  for (size_t i = 0; i < m.rows.size(); ++i) {
    json row{{"sample_id", m.sample_ids[i]}, {"bits", m.rows[i]}};
    if (i < m.rationales.size() && !m.rationales[i].empty()) {
      bool any = false;
      for (const std::string& r : m.rationales[i])
        if (!r.empty()) any = true;
      if (any) row["rationales"] = m.rationales[i];
    }
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["missing"] = m.missing_sample_ids;
  json repairs = json::array();
  for (const RepairEvent& e : m.repair_events)
    repairs.push_back({{"sample_id", e.sample_id},
                       {"slot", e.slot_label},
                       {"dropped_values", e.dropped_values}});
  j["repair_events"] = std::move(repairs);
  return j;
}

AnnotationMatrix matrix_from_json(const json& j) {
  AnnotationMatrix m;
  m.spec_name = j.value("spec_name", "");
  m.spec_hash = j.at("spec_hash").get<std::string>();
  m.annotator_model_id = j.value("annotator_model_id", "");
  for (const auto& c : j.at("columns")) {
    // Labels round-trip as pattern|slot...|value.
    const std::string label = c.get<std::string>();
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : label) {
      if (ch == '|') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    parts.push_back(cur);
    if (parts.size() < 3)
      throw std::invalid_argument("bad column label: " + label);
    SlotValueId id;
    id.pattern_id = parts.front();
    id.value_name = parts.back();
    id.slot_path.assign(parts.begin() + 1, parts.end() - 1);
    m.columns.push_back(std::move(id));
  }
  for (const auto& row : j.at("rows")) {
    m.sample_ids.push_back(row.at("sample_id").get<std::string>());
    m.rows.push_back(row.at("bits").get<std::vector<uint8_t>>());
    if (row.contains("rationales"))
      m.rationales.push_back(row.at("rationales").get<std::vector<std::string>>());
    else
      m.rationales.emplace_back(m.columns.size());
  }
  if (j.contains("missing"))
    m.missing_sample_ids = j.at("missing").get<std::vector<std::string>>();
  m.check();
  return m;
}

}  // namespace consys
