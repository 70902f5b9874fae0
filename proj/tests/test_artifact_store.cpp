#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "consys/artifact_store.hpp"

using namespace consys;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("consys-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("open_run writes a manifest and refuses to reopen") {
  TempDir tmp;
  RunStore store = RunStore::open_run(tmp.path / "run", "test concept",
                                      "multi_agent", {{"seed", 1}});
  CHECK(fs::exists(tmp.path / "run" / "manifest.json"));
  CHECK(store.status() == RunStatus::running);
  CHECK_THROWS(RunStore::open_run(tmp.path / "run", "x", "y", {}));
}

TEST_CASE("artifacts are immutable and hashed") {
  TempDir tmp;
  RunStore store = RunStore::open_run(tmp.path / "run", "c", "g", {});
  ArtifactRef ref = store.put_artifact("report", "report", "report.md",
                                       "# Report\n\nBody.\n");
  CHECK(ref.path == "report.md");
  CHECK(fs::exists(tmp.path / "run" / "report.md"));

  SUBCASE("duplicate id rejected") {
    CHECK_THROWS(store.put_artifact("report", "report", "other.md", "x"));
  }
  SUBCASE("duplicate path rejected") {
    CHECK_THROWS(store.put_artifact("other", "report", "report.md", "x"));
  }
  SUBCASE("manifest entry carries the content hash") {
    REQUIRE(store.entries().size() == 1);
    CHECK(store.entries()[0].content_hash == content_hash("# Report\n\nBody.\n"));
  }
  SUBCASE("writes refused once the run is closed") {
    store.set_status(RunStatus::complete);
    CHECK_THROWS(store.put_artifact("late", "draft", "late.json", "{}"));
  }
}

TEST_CASE("attach rehydrates a run from disk") {
  TempDir tmp;
  {
    RunStore store = RunStore::open_run(tmp.path / "run", "c", "g", {{"k", 2}});
    store.put_artifact("a", "draft", "a.json", "{}");
    store.set_status(RunStatus::complete);
  }
  RunStore back = RunStore::attach(tmp.path / "run");
  CHECK(back.status() == RunStatus::complete);
  REQUIRE(back.entries().size() == 1);
  CHECK(back.entries()[0].id == "a");
  CHECK(back.manifest()["config"]["k"] == 2);
}

TEST_CASE("transcript appends one line per record") {
  TempDir tmp;
  RunStore store = RunStore::open_run(tmp.path / "run", "c", "g", {});
  store.append_transcript({{"attempt", 1}});
  store.append_transcript({{"attempt", 2}});
  std::ifstream in(tmp.path / "run" / "transcript.ndjson");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(nlohmann::json::parse(line).contains("attempt"));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("resolve_anchor returns whole artifacts and markdown sections") {
  TempDir tmp;
  RunStore store = RunStore::open_run(tmp.path / "run", "c", "g", {});
  const std::string report =
      "# Report\n\nIntro text.\n\n## Definitions\n\nA slur is an epithet.\n\n"
      "## Sources\n\n- one\n";
  store.put_artifact("report", "report", "report.md", report);

  CHECK(store.resolve_anchor("report", "") == report);
  std::string section = store.resolve_anchor("report", "Definitions");
  CHECK(section.find("A slur is an epithet.") != std::string::npos);
  CHECK(section.find("Sources") == std::string::npos);

  SUBCASE("dangling artifact id") {
    CHECK_THROWS(store.resolve_anchor("missing", ""));
  }
  SUBCASE("dangling section") {
    CHECK_THROWS(store.resolve_anchor("report", "No Such Heading"));
  }
}

TEST_CASE("verify flags tampered artifacts") {
  TempDir tmp;
  RunStore store = RunStore::open_run(tmp.path / "run", "c", "g", {});
  store.put_artifact("a", "draft", "a.json", "{\"v\":1}");
  store.put_artifact("b", "draft", "b.json", "{\"v\":2}");
  CHECK(store.verify().empty());

  std::ofstream(tmp.path / "run" / "b.json") << "{\"v\":999}";
  auto bad = store.verify();
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == "b");
}

TEST_CASE("content_hash is stable and collision-sensitive") {
  CHECK(content_hash("abc") == content_hash("abc"));
  CHECK(content_hash("abc") != content_hash("abd"));
  CHECK(content_hash("") != content_hash(std::string("\0", 1)));
}
