#ifndef CONSYS_ARTIFACT_STORE_HPP
#define CONSYS_ARTIFACT_STORE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace consys {

enum class RunStatus { running, complete, failed };

std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct ArtifactEntry {
  std::string id;    // unique within the run, referenced by theory anchors
  std::string kind;  // "report", "panel", "proposals", "synthesis", "draft", "critique", ...
  std::string path;  // relative to the run directory
  std::string content_hash;
  std::string timestamp;
};

struct ArtifactRef {
  std::string id;
  std::string path;
};

/// Filesystem-backed store: one directory per run, manifest.json as the
/// normative index. Artifacts are written once and never modified.
class RunStore {
public:
  /// Creates `dir` (must not already contain a manifest) and writes the
  /// manifest in `running` state.
  static RunStore open_run(const std::filesystem::path& dir,
                           const std::string& concept_name,
                           const std::string& generator,
                           const nlohmann::json& config_snapshot);

  /// Attaches to an existing run directory.
  static RunStore attach(const std::filesystem::path& dir);

  ArtifactRef put_artifact(const std::string& id, const std::string& kind,
                           const std::string& relative_path,
                           const std::string& content);

  void append_transcript(const nlohmann::json& record);

  void set_status(RunStatus status);
  RunStatus status() const { return status_; }

  const std::vector<ArtifactEntry>& entries() const { return entries_; }
  const std::filesystem::path& directory() const { return dir_; }
  nlohmann::json manifest() const;

  /// Returns the artifact's text, or the named section when `location` is a
  /// markdown heading. Throws on dangling anchors.
  std::string resolve_anchor(const std::string& artifact_id,
                             const std::string& location) const;

  /// Re-hashes every artifact against the manifest. Returns mismatched ids.
  std::vector<std::string> verify() const;

private:
  RunStore() = default;
  void write_manifest() const;

  std::filesystem::path dir_;
  std::string concept_name_;
  std::string generator_;
  nlohmann::json config_;
  RunStatus status_ = RunStatus::running;
  std::vector<ArtifactEntry> entries_;
};

std::string content_hash(const std::string& content);

}  // namespace consys

#endif
