#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "consys/agreement.hpp"
#include "consys/annotator.hpp"
#include "consys/artifact_store.hpp"
#include "consys/direct_systematizer.hpp"
#include "consys/ingest.hpp"
#include "consys/multi_agent.hpp"
#include "consys/recoverability.hpp"
#include "consys/spec_model.hpp"
#include "consys/worksheet.hpp"

namespace fs = std::filesystem;
using consys::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitPipelineFailure = 2;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CLI::ValidationError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

json load_json(const fs::path& p) { return json::parse(read_file(p)); }

consys::ConceptBrief load_brief(const fs::path& p) {
  json j = load_json(p);
  consys::ConceptBrief brief;
  brief.concept_name = j.at("concept_name").get<std::string>();
  brief.description = j.at("description").get<std::string>();
  brief.context = j.value("context", "");
  return brief;
}

consys::RunConfig load_run_config(const fs::path& p) {
  consys::RunConfig config;
  if (p.empty()) return config;
  json j = load_json(p);
  config.panel_size = j.value("panel_size", config.panel_size);
  config.delphi_rounds = j.value("delphi_rounds", config.delphi_rounds);
  config.max_spec_rounds = j.value("max_spec_rounds", config.max_spec_rounds);
  config.score_threshold = j.value("score_threshold", config.score_threshold);
  config.seed = j.value("seed", config.seed);
  if (j.contains("roles"))
    for (const auto& [name, rc] : j.at("roles").items())
      config.roles[name] = {rc.value("model_id", "default"),
                            rc.value("temperature", 0.2)};
  if (j.contains("question_bank"))
    config.bank = consys::parse_question_bank(j.at("question_bank"));
  return config;
}

int run_systematize(const std::string& brief_path, const std::string& mode,
                    const std::string& config_path, const std::string& out_dir) {
  consys::ConceptBrief brief = load_brief(brief_path);
  consys::RunConfig config = load_run_config(
      config_path.empty() ? fs::path() : fs::path(config_path));
  consys::Gateway gateway(consys::provider_from_env());

  if (mode == "direct") {
    consys::RunStore store = consys::RunStore::open_run(
        out_dir, brief.concept_name, "direct", config.snapshot());
    gateway.set_transcript_sink(
        [&store](const json& r) { store.append_transcript(r); });
    consys::DirectOptions options;
    options.model_id = config.role("synthesizer").model_id;
    options.bank = config.bank;
    try {
      consys::ConceptSpec spec = consys::systematize_direct(gateway, brief, options);
      store.put_artifact("spec", "spec", "spec.json",
                         consys::serialize_spec(spec).dump(2) + "\n");
      store.set_status(consys::RunStatus::complete);
    } catch (...) {
      store.set_status(consys::RunStatus::failed);
      throw;
    }
    std::cout << "direct systematization complete: " << out_dir << "/spec.json\n";
    return kExitOk;
  }
  if (mode == "multi") {
    consys::MultiAgentResult result =
        consys::systematize_multi(gateway, brief, config, out_dir);
    // The final spec doubles as the run's primary artifact.
    consys::RunStore store = consys::RunStore::attach(out_dir);
    write_file(fs::path(out_dir) / "spec.json",
               consys::serialize_spec(result.spec).dump(2) + "\n");
    std::cout << "multi-agent systematization complete after "
              << result.spec_rounds_used << " spec round(s)\n";
    std::cout << "final worksheet scores:\n";
    for (consys::WorksheetAttribute a : consys::kAllAttributes) {
      const auto& s = result.final_assessment.scores.at(a);
      std::cout << "  " << consys::to_string(a) << ": "
                << (s.value ? std::to_string(*s.value) : "n/a") << "\n";
    }
    return kExitOk;
  }
  std::cerr << "unknown mode: " << mode << " (expected direct|multi)\n";
  return kExitUserError;
}

int run_validate_spec(const std::string& spec_path) {
  consys::ConceptSpec spec;
  try {
    spec = consys::parse_spec_text(read_file(spec_path));
  } catch (const consys::SpecParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUserError;
  }
  const auto findings = consys::validate_spec(spec);
  bool any_error = false;
  for (const consys::Finding& f : findings) {
    any_error |= f.severity == consys::Severity::error;
    std::cout << (f.severity == consys::Severity::error ? "error" : "warning")
              << " at " << f.path << ": " << f.message << "\n";
  }
  if (findings.empty()) std::cout << "spec is valid: no findings\n";
  return any_error ? kExitUserError : kExitOk;
}

consys::LoadedDataset load_with_descriptor(const std::string& dataset_path,
                                           const std::string& descriptor_path,
                                           consys::DatasetDescriptor* desc_out) {
  consys::DatasetDescriptor desc =
      consys::descriptor_from_json(load_json(descriptor_path));
  if (desc_out) *desc_out = desc;
  return consys::load_dataset(dataset_path, desc);
}

int run_annotate(const std::string& spec_path, const std::string& dataset_path,
                 const std::string& descriptor_path, const std::string& out_path,
                 const std::string& model_id) {
  consys::ConceptSpec spec = consys::parse_spec_text(read_file(spec_path));
  consys::LoadedDataset data =
      load_with_descriptor(dataset_path, descriptor_path, nullptr);
  consys::Gateway gateway(consys::provider_from_env());
  consys::AnnotateOptions options;
  options.model_id = model_id;
  consys::AnnotationMatrix matrix =
      consys::annotate_dataset(gateway, data.samples, spec, options);
  write_file(out_path, consys::matrix_to_json(matrix).dump(2) + "\n");
  std::cout << "annotated " << matrix.rows.size() << " samples ("
            << matrix.missing_sample_ids.size() << " missing) over "
            << matrix.columns.size() << " slot values -> " << out_path << "\n";
  return kExitOk;
}

int run_recoverability(const std::string& source_path,
                       const std::string& target_path,
                       const std::string& target_spec_path,
                       const std::string& out_path, int k_max, double lambda,
                       int rare_threshold, uint64_t seed) {
  consys::AnnotationMatrix x_source =
      consys::matrix_from_json(load_json(source_path));
  consys::AnnotationMatrix x_target =
      consys::matrix_from_json(load_json(target_path));
  consys::ConceptSpec target_spec =
      consys::parse_spec_text(read_file(target_spec_path));
  consys::RecoverabilityConfig config;
  config.k_max = k_max;
  config.lambda = lambda;
  config.rare_threshold = rare_threshold;
  config.seed = seed;
  consys::RecoverabilityReport report =
      consys::compare_specs(x_source, x_target, target_spec, config);
  write_file(out_path, consys::report_to_json(report).dump(2) + "\n");
  std::cout << std::fixed << std::setprecision(3);
  for (const consys::SlotRecoverability& s : report.slots) {
    std::cout << "  " << s.slot_label << ": ";
    if (s.excluded_reason)
      std::cout << "excluded (" << *s.excluded_reason << ")\n";
    else
      std::cout << *s.recoverability << " (H=" << s.H << ", CE=" << s.CE << ")\n";
  }
  std::cout << "aggregate: " << report.aggregate << "\n";
  return kExitOk;
}

int run_recoverability_table(const std::string& reports_dir) {
  // Pairwise grid: rows = source spec, columns = target spec.
  std::map<std::pair<std::string, std::string>, double> cells;
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(reports_dir)) {
    if (entry.path().extension() != ".json") continue;
    consys::RecoverabilityReport r =
        consys::report_from_json(load_json(entry.path()));
    const std::string src =
        r.source_spec_name.empty() ? r.source_spec_hash : r.source_spec_name;
    const std::string tgt =
        r.target_spec_name.empty() ? r.target_spec_hash : r.target_spec_name;
    names.insert(src);
    names.insert(tgt);
    cells[{src, tgt}] = r.aggregate;
  }
  if (cells.empty()) {
    std::cerr << "no report files in " << reports_dir << "\n";
    return kExitUserError;
  }
  size_t width = 12;
  for (const std::string& n : names) width = std::max(width, n.size() + 2);
  std::cout << std::left << std::setw((int)width) << "source\\target";
  for (const std::string& c : names) std::cout << std::setw((int)width) << c;
  std::cout << "\n" << std::fixed << std::setprecision(3);
  for (const std::string& r : names) {
    std::cout << std::setw((int)width) << r;
    for (const std::string& c : names) {
      auto it = cells.find({r, c});
      if (it == cells.end())
        std::cout << std::setw((int)width) << (r == c ? "-" : "");
      else
        std::cout << std::setw((int)width) << it->second;
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int run_kappa(const std::string& a_path, const std::string& b_path,
              const std::string& out_path) {
  consys::AnnotationMatrix x_a = consys::matrix_from_json(load_json(a_path));
  consys::AnnotationMatrix x_b = consys::matrix_from_json(load_json(b_path));
  consys::AgreementReport report = consys::pooled_cohens_kappa(x_a, x_b);
  if (!out_path.empty())
    write_file(out_path, consys::agreement_to_json(report).dump(2) + "\n");
  std::cout << std::fixed << std::setprecision(4);
  if (report.undefined)
    std::cout << "pooled kappa: undefined (both annotators constant and equal)\n";
  else
    std::cout << "pooled kappa: " << report.pooled_kappa << "\n";
  std::cout << "p_o=" << report.observed_agreement
            << " p_e=" << report.expected_agreement << " over "
            << report.n_judgments << " judgments\n";
  return kExitOk;
}

int run_sample(const std::string& dataset_path, const std::string& descriptor_path,
               const std::string& strata_path, uint64_t seed,
               const std::string& out_path) {
  consys::DatasetDescriptor desc;
  consys::LoadedDataset data =
      load_with_descriptor(dataset_path, descriptor_path, &desc);
  consys::StratumSpec strata = consys::strata_from_json(load_json(strata_path));
  const std::vector<size_t> assignment =
      consys::assign_strata(data, desc, strata);
  const std::vector<size_t> selected =
      consys::stratified_sample(data, assignment, strata, seed);

  std::ostringstream os;
  if (desc.format == consys::DatasetFormat::flat_text_table) {
    // Re-emit the input rows for the selected ids, plus a stratum column.
    std::istringstream in(read_file(dataset_path));
    std::string header;
    std::getline(in, header);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) lines.push_back(line);
    os << header << ",stratum\n";
    // Input row order matches data.samples order by construction.
    for (size_t idx : selected)
      os << lines.at(idx) << "," << assignment[idx] << "\n";
  } else {
    for (size_t idx : selected) {
      json ctx = json::array();
      for (const consys::ContextTurn& t : data.samples[idx].context)
        ctx.push_back({{"role", t.role}, {"content", t.content}});
      os << json{{"id", data.samples[idx].id},
                 {"body", data.samples[idx].body},
                 {"context", ctx},
                 {"stratum", assignment[idx]}}
                .dump()
         << "\n";
    }
  }
  write_file(out_path, os.str());
  std::cout << "sampled " << selected.size() << " of " << data.samples.size()
            << " samples";
  if (data.skipped_conversations)
    std::cout << " (" << data.skipped_conversations
              << " conversations skipped: no assistant turn)";
  std::cout << " -> " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept systematization and evaluation toolkit"};
  app.require_subcommand(1);

  std::string brief_path, mode = "direct", config_path, out_dir;
  auto* systematize = app.add_subcommand(
      "systematize", "Produce a concept spec from a concept brief");
  systematize->add_option("--concept-brief", brief_path, "Brief JSON file")
      ->required();
  systematize->add_option("--mode", mode, "direct|multi")->required();
  systematize->add_option("--config", config_path, "Run-config JSON file");
  systematize->add_option("--out", out_dir, "Run directory")->required();

  std::string spec_path;
  auto* validate = app.add_subcommand("validate-spec",
                                      "Check a concept-spec file's invariants");
  validate->add_option("--spec", spec_path, "Concept-spec JSON file")->required();

  std::string dataset_path, descriptor_path, matrix_out, annot_model = "default";
  auto* annotate = app.add_subcommand(
      "annotate", "Annotate a dataset against every slot value of a spec");
  annotate->add_option("--spec", spec_path, "Concept-spec JSON file")->required();
  annotate->add_option("--dataset", dataset_path, "Dataset file")->required();
  annotate->add_option("--descriptor", descriptor_path, "Descriptor JSON file")
      ->required();
  annotate->add_option("--out", matrix_out, "Matrix output file")->required();
  annotate->add_option("--model", annot_model, "Annotator model id");

  std::string source_matrix, target_matrix, target_spec_path, report_out;
  int k_max = 5, rare_threshold = 5;
  double lambda = 1.0;
  uint64_t seed = 0;
  auto* recover = app.add_subcommand(
      "recoverability", "Information recoverability of target from source");
  recover->add_option("--source-matrix", source_matrix, "Source matrix file")
      ->required();
  recover->add_option("--target-matrix", target_matrix, "Target matrix file")
      ->required();
  recover->add_option("--target-spec", target_spec_path,
                      "Target concept-spec file (for slot topologies)")
      ->required();
  recover->add_option("--out", report_out, "Report output file")->required();
  recover->add_option("--k-max", k_max, "Max stratified folds");
  recover->add_option("--lambda", lambda, "L2 strength");
  recover->add_option("--rare-threshold", rare_threshold,
                      "Minimum minority/positive count");
  recover->add_option("--seed", seed, "Fold seed");

  std::string reports_dir;
  auto* table = app.add_subcommand("recoverability-table",
                                   "Print a pairwise aggregate grid");
  table->add_option("--reports", reports_dir, "Directory of report JSON files")
      ->required();

  std::string matrix_a, matrix_b, kappa_out;
  auto* kappa = app.add_subcommand(
      "kappa", "Pooled Cohen's kappa between two annotation matrices");
  kappa->add_option("--matrix-a", matrix_a, "First matrix file")->required();
  kappa->add_option("--matrix-b", matrix_b, "Second matrix file")->required();
  kappa->add_option("--out", kappa_out, "Report output file");

  std::string strata_path, sample_out;
  uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Stratified dataset sampling");
  sample->add_option("--dataset", dataset_path, "Dataset file")->required();
  sample->add_option("--descriptor", descriptor_path, "Descriptor JSON file")
      ->required();
  sample->add_option("--strata", strata_path, "Strata JSON file")->required();
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--out", sample_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (systematize->parsed())
      return run_systematize(brief_path, mode, config_path, out_dir);
    if (validate->parsed()) return run_validate_spec(spec_path);
    if (annotate->parsed())
      return run_annotate(spec_path, dataset_path, descriptor_path, matrix_out,
                          annot_model);
    if (recover->parsed())
      return run_recoverability(source_matrix, target_matrix, target_spec_path,
                                report_out, k_max, lambda, rare_threshold, seed);
    if (table->parsed()) return run_recoverability_table(reports_dir);
    if (kappa->parsed()) return run_kappa(matrix_a, matrix_b, kappa_out);
    if (sample->parsed())
      return run_sample(dataset_path, descriptor_path, strata_path, sample_seed,
                        sample_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const consys::SpecParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUserError;
  } catch (const std::exception& e) {
    std::cerr << "pipeline failure: " << e.what() << "\n";
    return kExitPipelineFailure;
  }
  return kExitUserError;
}
