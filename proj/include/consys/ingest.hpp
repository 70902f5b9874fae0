#ifndef CONSYS_INGEST_HPP
#define CONSYS_INGEST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "consys/annotator.hpp"

namespace consys {

enum class DatasetFormat { flat_text_table, conversation_log };

struct DatasetDescriptor {
  std::string name;
  DatasetFormat format = DatasetFormat::flat_text_table;
  std::string strata_field;  // guiding label: annotator-column prefix (flat)
                             // or label key (conversation)
  enum class StrataKind { numeric_buckets, ordinal_classes } strata_kind =
      StrataKind::numeric_buckets;
};

DatasetDescriptor descriptor_from_json(const nlohmann::json& j);

/// Numeric strata: closed ranges as printed (scores rounded to 2 decimals
/// before bucketing). Ordinal strata: groups of class labels. `cap` and
/// `equalize` are mutually exclusive.
struct StratumSpec {
  std::vector<std::pair<double, double>> ranges;           // numeric_buckets
  std::vector<std::vector<std::string>> class_groups;      // ordinal_classes
  std::optional<size_t> cap;
  bool equalize = false;

  void check() const;
};

StratumSpec strata_from_json(const nlohmann::json& j);

/// A sample's stratum key: bucket index (numeric) or group index (ordinal).
struct LoadedDataset {
  std::vector<Sample> samples;
  std::vector<std::string> strata_values;  // raw guiding-label value per sample
  std::vector<double> scores;              // numeric strata only
  size_t skipped_conversations = 0;        // conversations with no assistant turn
};

LoadedDataset load_dataset(const std::string& path,
                           const DatasetDescriptor& descriptor);

/// One sample per assistant turn; context = all prior turns in order.
/// Conversations without an assistant turn are skipped and counted.
struct ConversationTurn {
  std::string conversation_id;
  int turn_index = 0;
  std::string role;
  std::string content;
  std::map<std::string, std::string> labels;
};

struct ExpandResult {
  std::vector<Sample> samples;
  std::vector<std::string> labels;  // guiding label per sample (may be empty)
  size_t skipped_conversations = 0;
};

ExpandResult expand_conversations(const std::vector<ConversationTurn>& turns,
                                  const std::string& label_key = "");

double average_annotator_score(const std::vector<int>& labels);

/// Maps each sample to a stratum index, or throws when one falls outside all
/// strata. Numeric scores are rounded to 2 decimals first.
std::vector<size_t> assign_strata(const LoadedDataset& data,
                                  const DatasetDescriptor& descriptor,
                                  const StratumSpec& strata);

/// Uniform without-replacement sampling per stratum; deterministic by seed.
/// Cap mode: min(cap, size) per stratum. Equalize mode: smallest stratum size
/// everywhere. Returns selected indices into `data.samples`, in stratum then
/// original order.
std::vector<size_t> stratified_sample(const LoadedDataset& data,
                                      const std::vector<size_t>& strata_index,
                                      const StratumSpec& strata, uint64_t seed);

}  // namespace consys

#endif
