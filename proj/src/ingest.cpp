#include "consys/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace consys {

using nlohmann::json;

DatasetDescriptor descriptor_from_json(const json& j) {
  DatasetDescriptor d;
  d.name = j.value("name", "");
  const std::string format = j.at("format").get<std::string>();
  if (format == "flat_text_table")
    d.format = DatasetFormat::flat_text_table;
  else if (format == "conversation_log")
    d.format = DatasetFormat::conversation_log;
  else
    throw std::invalid_argument("unknown dataset format: " + format);
  d.strata_field = j.at("strata_field").get<std::string>();
  const std::string kind = j.at("strata_kind").get<std::string>();
  if (kind == "numeric_buckets")
    d.strata_kind = DatasetDescriptor::StrataKind::numeric_buckets;
  else if (kind == "ordinal_classes")
    d.strata_kind = DatasetDescriptor::StrataKind::ordinal_classes;
  else
    throw std::invalid_argument("unknown strata kind: " + kind);
  return d;
}

void StratumSpec::check() const {
  if (cap && equalize)
    throw std::invalid_argument("cap and equalize are mutually exclusive");
  if (cap && *cap == 0) throw std::invalid_argument("cap must be positive");
  if (!ranges.empty() && !class_groups.empty())
    throw std::invalid_argument("strata spec mixes numeric and ordinal strata");
  for (size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].first > ranges[i].second)
      throw std::invalid_argument("stratum range is inverted");
    if (i > 0 && ranges[i].first <= ranges[i - 1].second)
      throw std::invalid_argument("stratum ranges overlap or are unordered");
  }
}

StratumSpec strata_from_json(const json& j) {
  StratumSpec s;
  if (j.contains("ranges"))
    for (const auto& r : j.at("ranges"))
      s.ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
  if (j.contains("classes"))
    for (const auto& g : j.at("classes"))
      s.class_groups.push_back(g.get<std::vector<std::string>>());
  if (j.contains("cap")) s.cap = j.at("cap").get<size_t>();
  s.equalize = j.value("equalize", false);
  s.check();
  return s;
}

namespace {

// RFC-4180-ish CSV row parser (quoted fields, doubled quotes).
std::vector<std::string> parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

double average_annotator_score(const std::vector<int>& labels) {
  if (labels.empty())
    throw std::invalid_argument("no annotator labels for sample");
  double sum = 0;
  for (int v : labels) sum += v;
  return sum / static_cast<double>(labels.size());
}

ExpandResult expand_conversations(const std::vector<ConversationTurn>& turns,
                                  const std::string& label_key) {
  // Group by conversation id, preserving first-seen order; turns sorted by
  // turn_index within each conversation.
  std::vector<std::string> order;
  std::map<std::string, std::vector<ConversationTurn>> by_conv;
  for (const ConversationTurn& t : turns) {
    if (!by_conv.count(t.conversation_id)) order.push_back(t.conversation_id);
    by_conv[t.conversation_id].push_back(t);
  }

  ExpandResult out;
  for (const std::string& cid : order) {
    auto& conv = by_conv[cid];
    std::stable_sort(conv.begin(), conv.end(),
                     [](const ConversationTurn& a, const ConversationTurn& b) {
                       return a.turn_index < b.turn_index;
                     });
    bool any_assistant = false;
    std::vector<ContextTurn> context;
    std::string last_label;
    for (const ConversationTurn& t : conv) {
      auto lit = t.labels.find(label_key);
      if (lit != t.labels.end()) last_label = lit->second;
      if (t.role == "assistant") {
        any_assistant = true;
        Sample s;
        s.id = cid + "#" + std::to_string(t.turn_index);
        s.body = t.content;
        s.context = context;
        out.samples.push_back(std::move(s));
        out.labels.push_back(last_label);
      }
      context.push_back({t.role, t.content});
    }
    if (!any_assistant) ++out.skipped_conversations;
  }
  return out;
}

LoadedDataset load_dataset(const std::string& path,
                           const DatasetDescriptor& descriptor) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);

  LoadedDataset out;
  if (descriptor.format == DatasetFormat::flat_text_table) {
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error(path + ": empty table");
    const std::vector<std::string> header = parse_csv_row(line);
    auto find_col = [&](const std::string& name) -> int {
      for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
      return -1;
    };
    const int id_col = find_col("id");
    const int text_col = find_col("text");
    if (id_col < 0 || text_col < 0)
      throw std::runtime_error(path + ": required columns id,text missing");

    std::vector<int> annot_cols;
    int strata_col = -1;
    if (descriptor.strata_kind == DatasetDescriptor::StrataKind::numeric_buckets) {
      for (size_t i = 0; i < header.size(); ++i)
        if (header[i].rfind(descriptor.strata_field, 0) == 0 &&
            (int)i != id_col && (int)i != text_col)
          annot_cols.push_back(static_cast<int>(i));
      if (annot_cols.empty())
        throw std::runtime_error(path + ": no annotator columns with prefix \"" +
                                 descriptor.strata_field + "\"");
    } else {
      strata_col = find_col(descriptor.strata_field);
      if (strata_col < 0)
        throw std::runtime_error(path + ": missing strata field \"" +
                                 descriptor.strata_field + "\"");
    }

    size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::vector<std::string> row = parse_csv_row(line);
      if (row.size() != header.size())
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": malformed row (field count)");
      Sample s;
      s.id = row[id_col];
      s.body = row[text_col];
      out.samples.push_back(std::move(s));
      if (descriptor.strata_kind ==
          DatasetDescriptor::StrataKind::numeric_buckets) {
        std::vector<int> labels;
        for (int c : annot_cols) {
          if (row[c].empty()) continue;
          try {
            labels.push_back(std::stoi(row[c]));
          } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": non-integer annotator label \"" +
                                     row[c] + "\"");
          }
        }
        out.scores.push_back(average_annotator_score(labels));
        out.strata_values.push_back("");
      } else {
        out.strata_values.push_back(row[strata_col]);
        out.scores.push_back(0);
      }
    }
  } else {
    // Newline-delimited conversation records.
    std::vector<ConversationTurn> turns;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                                 e.what());
      }
      ConversationTurn t;
      t.conversation_id = rec.at("conversation_id").get<std::string>();
      t.turn_index = rec.at("turn_index").get<int>();
      t.role = rec.at("role").get<std::string>();
      t.content = rec.at("content").get<std::string>();
      if (rec.contains("labels"))
        for (const auto& [k, v] : rec.at("labels").items())
          t.labels[k] = v.is_string() ? v.get<std::string>() : v.dump();
      turns.push_back(std::move(t));
    }
    ExpandResult expanded = expand_conversations(turns, descriptor.strata_field);
    out.samples = std::move(expanded.samples);
    out.strata_values = std::move(expanded.labels);
    out.scores.assign(out.samples.size(), 0);
    out.skipped_conversations = expanded.skipped_conversations;
  }
  return out;
}

std::vector<size_t> assign_strata(const LoadedDataset& data,
                                  const DatasetDescriptor& descriptor,
                                  const StratumSpec& strata) {
  strata.check();
  std::vector<size_t> out(data.samples.size());
  for (size_t i = 0; i < data.samples.size(); ++i) {
    bool found = false;
    if (descriptor.strata_kind == DatasetDescriptor::StrataKind::numeric_buckets) {
      const double s = round2(data.scores[i]);
      for (size_t b = 0; b < strata.ranges.size(); ++b)
        if (s >= strata.ranges[b].first - 1e-9 &&
            s <= strata.ranges[b].second + 1e-9) {
          out[i] = b;
          found = true;
          break;
        }
    } else {
      for (size_t g = 0; g < strata.class_groups.size(); ++g)
        for (const std::string& cls : strata.class_groups[g])
          if (cls == data.strata_values[i]) {
            out[i] = g;
            found = true;
            break;
          }
    }
    if (!found)
      throw std::runtime_error("sample " + data.samples[i].id +
                               " falls outside all strata");
  }
  return out;
}

std::vector<size_t> stratified_sample(const LoadedDataset& data,
                                      const std::vector<size_t>& strata_index,
                                      const StratumSpec& strata, uint64_t seed) {
  strata.check();
  const size_t n_strata = strata.ranges.empty() ? strata.class_groups.size()
                                                : strata.ranges.size();
  std::vector<std::vector<size_t>> buckets(n_strata);
  for (size_t i = 0; i < strata_index.size(); ++i)
    buckets.at(strata_index[i]).push_back(i);

  size_t smallest = SIZE_MAX;
  for (const auto& b : buckets) smallest = std::min(smallest, b.size());

  std::vector<size_t> selected;
  for (size_t b = 0; b < n_strata; ++b) {
    size_t target = buckets[b].size();
    if (strata.cap) target = std::min(target, *strata.cap);
    if (strata.equalize) target = smallest;
    std::vector<size_t> pool = buckets[b];
    // Per-stratum substream so adding a stratum never perturbs the others.
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * (b + 1));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(target);
    std::sort(pool.begin(), pool.end());
    selected.insert(selected.end(), pool.begin(), pool.end());
  }
  return selected;
}

}  // namespace consys
