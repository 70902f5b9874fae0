#include "consys/artifact_store.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace consys {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::complete: return "complete";
    case RunStatus::failed: return "failed";
  }
  return "running";
}

RunStatus run_status_from_string(const std::string& s) {
  if (s == "running") return RunStatus::running;
  if (s == "complete") return RunStatus::complete;
  if (s == "failed") return RunStatus::failed;
  throw std::invalid_argument("unknown run status: " + s);
}

std::string content_hash(const std::string& content) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

}  // namespace

RunStore RunStore::open_run(const fs::path& dir, const std::string& concept_name,
                            const std::string& generator, const json& config) {
  if (fs::exists(dir / "manifest.json"))
    throw std::runtime_error("run directory already has a manifest: " +
                             dir.string());
  fs::create_directories(dir);
  RunStore store;
  store.dir_ = dir;
  store.concept_name_ = concept_name;
  store.generator_ = generator;
  store.config_ = config;
  store.status_ = RunStatus::running;
  store.write_manifest();
  return store;
}

RunStore RunStore::attach(const fs::path& dir) {
  json m = json::parse(read_file(dir / "manifest.json"));
  RunStore store;
  store.dir_ = dir;
  store.concept_name_ = m.value("concept", "");
  store.generator_ = m.value("generator", "");
  store.config_ = m.value("config", json::object());
  store.status_ = run_status_from_string(m.value("status", "running"));
  for (const auto& e : m.value("artifacts", json::array()))
    store.entries_.push_back({e.at("id"), e.at("kind"), e.at("path"),
                              e.at("content_hash"), e.at("timestamp")});
  return store;
}

json RunStore::manifest() const {
  json artifacts = json::array();
  for (const ArtifactEntry& e : entries_)
    artifacts.push_back({{"id", e.id},
                         {"kind", e.kind},
                         {"path", e.path},
                         {"content_hash", e.content_hash},
                         {"timestamp", e.timestamp}});
  return {{"concept", concept_name_},
          {"generator", generator_},
          {"config", config_},
          {"status", to_string(status_)},
          {"artifacts", artifacts}};
}

void RunStore::write_manifest() const {
  write_file_atomic(dir_ / "manifest.json", manifest().dump(2) + "\n");
}

ArtifactRef RunStore::put_artifact(const std::string& id, const std::string& kind,
                                   const std::string& relative_path,
                                   const std::string& content) {
  if (status_ != RunStatus::running)
    throw std::runtime_error("cannot write artifact to a " + to_string(status_) +
                             " run");
  for (const ArtifactEntry& e : entries_)
    if (e.id == id)
      throw std::runtime_error("artifact id already stored: " + id);
  const fs::path target = dir_ / relative_path;
  fs::create_directories(target.parent_path());
  if (fs::exists(target))
    throw std::runtime_error("artifact path already exists: " + target.string());
  write_file_atomic(target, content);
  entries_.push_back({id, kind, relative_path, content_hash(content),
                      iso_timestamp()});
  write_manifest();
  return {id, relative_path};
}

void RunStore::append_transcript(const json& record) {
  std::ofstream out(dir_ / "transcript.ndjson", std::ios::app);
  out << record.dump() << "\n";
}

void RunStore::set_status(RunStatus status) {
  status_ = status;
  write_manifest();
}

std::string RunStore::resolve_anchor(const std::string& artifact_id,
                                     const std::string& location) const {
  const ArtifactEntry* entry = nullptr;
  for (const ArtifactEntry& e : entries_)
    if (e.id == artifact_id) entry = &e;
  if (!entry)
    throw std::runtime_error("dangling anchor: no artifact \"" + artifact_id +
                             "\" in run " + dir_.string());
  const std::string text = read_file(dir_ / entry->path);
  if (location.empty()) return text;

  // Markdown section lookup: return from the heading line containing
  // `location` up to the next heading of equal or higher level.
  std::istringstream is(text);
  std::string line;
  std::ostringstream section;
  int level = 0;
  bool in_section = false;
  while (std::getline(is, line)) {
    int hashes = 0;
    while (hashes < (int)line.size() && line[hashes] == '#') ++hashes;
    if (in_section && hashes > 0 && hashes <= level) break;
    if (!in_section && hashes > 0 &&
        line.find(location) != std::string::npos) {
      in_section = true;
      level = hashes;
    }
    if (in_section) section << line << "\n";
  }
  if (!in_section)
    throw std::runtime_error("dangling anchor: no section matching \"" +
                             location + "\" in artifact \"" + artifact_id + "\"");
  return section.str();
}

std::vector<std::string> RunStore::verify() const {
  std::vector<std::string> bad;
  for (const ArtifactEntry& e : entries_) {
    const fs::path p = dir_ / e.path;
    if (!fs::exists(p) || content_hash(read_file(p)) != e.content_hash)
      bad.push_back(e.id);
  }
  return bad;
}

}  // namespace consys
