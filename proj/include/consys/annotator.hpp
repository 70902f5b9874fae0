#ifndef CONSYS_ANNOTATOR_HPP
#define CONSYS_ANNOTATOR_HPP

#include <optional>
#include <string>
#include <vector>

#include "consys/llm_gateway.hpp"
#include "consys/spec_model.hpp"

namespace consys {

struct ContextTurn {
  std::string role;  // "user" or "assistant"
  std::string content;
};

struct Sample {
  std::string id;
  std::string body;
  std::vector<ContextTurn> context;  // prior turns, in order
};

struct SlotJudgment {
  size_t column = 0;  // index into the matrix column order
  bool applies = false;
  std::string rationale;  // required when applies, <= 280 chars
};

/// A single-choice violation resolved at assembly time: the reply asserted
/// more than one value of a single_choice slot and only the first (in column
/// order) was kept.
struct RepairEvent {
  std::string sample_id;
  std::string slot_label;
  std::vector<std::string> dropped_values;
};

struct AnnotationMatrix {
  std::string spec_name;
  std::string spec_hash;
  std::string annotator_model_id;
  std::vector<SlotValueId> columns;           // == enumerate_slot_values(spec)
  std::vector<std::string> sample_ids;        // row order
  std::vector<std::vector<uint8_t>> rows;     // rows[i].size() == columns.size()
  std::vector<std::vector<std::string>> rationales;  // parallel to rows, may be empty
  std::vector<std::string> missing_sample_ids;       // failed rows, excluded downstream
  std::vector<RepairEvent> repair_events;

  void check() const;  // throws on invariant violation
};

struct AnnotateOptions {
  std::string model_id = "default";
  double temperature = 0.2;
  double max_failure_fraction = 0.10;  // beyond this the run aborts
};

/// One boolean+rationale field pair per enumerated leaf slot value.
OutputSchema build_annotation_schema(const ConceptSpec& spec);

/// Field name used for a column in the structured annotation reply.
std::string annotation_field_name(size_t column_index);

std::vector<SlotJudgment> annotate_sample(Gateway& gateway, const Sample& sample,
                                          const ConceptSpec& spec,
                                          const AnnotateOptions& options,
                                          std::vector<RepairEvent>* repairs = nullptr);

AnnotationMatrix annotate_dataset(Gateway& gateway,
                                  const std::vector<Sample>& samples,
                                  const ConceptSpec& spec,
                                  const AnnotateOptions& options = {});

json matrix_to_json(const AnnotationMatrix& m);
AnnotationMatrix matrix_from_json(const json& j);

}  // namespace consys

#endif
