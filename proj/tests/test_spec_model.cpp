#include <doctest.h>

#include "consys/spec_model.hpp"
#include "test_util.hpp"

using namespace consys;

TEST_CASE("fig1 fixture parses with expected structure") {
  ConceptSpec spec = testutil::fig1_spec();
  CHECK(spec.patterns.size() == 1);
  CHECK(spec.patterns[0].slots.size() == 2);
  CHECK(spec.patterns[0].slots[0].name == "TARGET_GROUP");
  CHECK(spec.patterns[0].slots[0].values.size() == 4);
  CHECK(spec.patterns[0].slots[1].values.size() == 3);
  CHECK(validate_spec(spec).empty());
}

TEST_CASE("zero patterns is an invariant violation") {
  json doc{{"concept_name", "x"}, {"concept_brief", "y"},
           {"patterns", json::array()}};
  CHECK_THROWS_AS(parse_spec(doc), SpecParseError);
}

TEST_CASE("unresolved placeholder names the pattern and placeholder") {
  json doc = serialize_spec(testutil::fig1_spec());
  doc["patterns"][0]["template"] = "Text with [FOO] only and [TARGET_GROUP] and [HATE_EXPRESSION].";
  try {
    parse_spec(doc);
    FAIL("expected SpecParseError");
  } catch (const SpecParseError& e) {
    CHECK(std::string(e.what()).find("hbr-1") != std::string::npos);
    CHECK(std::string(e.what()).find("FOO") != std::string::npos);
  }
}

TEST_CASE("unknown fields are rejected loudly") {
  json doc = serialize_spec(testutil::fig1_spec());
  doc["surprise"] = 1;
  CHECK_THROWS_AS(parse_spec(doc), SpecParseError);
  doc.erase("surprise");
  doc["patterns"][0]["extra"] = "x";
  CHECK_THROWS_AS(parse_spec(doc), SpecParseError);
}

TEST_CASE("slot with both values and children is rejected") {
  json doc = serialize_spec(testutil::fig1_spec());
  doc["patterns"][0]["slots"][0]["children"] = json::array(
      {{{"name", "CHILD"},
        {"definition", "d"},
        {"values", json::array({{{"name", "v"}, {"definition", "d"}}})}}});
  CHECK_THROWS_AS(parse_spec(doc), SpecParseError);
}

TEST_CASE("unreferenced top-level slot is rejected") {
  json doc = serialize_spec(testutil::fig1_spec());
  doc["patterns"][0]["template"] = "Text that references [TARGET_GROUP] only.";
  CHECK_THROWS_AS(parse_spec(doc), SpecParseError);
}

TEST_CASE("validate_spec findings") {
  ConceptSpec spec = testutil::fig1_spec();

  SUBCASE("clean fixture has no findings") {
    CHECK(validate_spec(spec).empty());
  }
  SUBCASE("empty value definition yields one finding at its path") {
    spec.patterns[0].slots[0].values[1].definition = "";
    auto findings = validate_spec(spec);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].path == "patterns[0].slots[0].values[1].definition");
  }
  SUBCASE("duplicate value name yields one finding") {
    spec.patterns[0].slots[0].values[1].name =
        spec.patterns[0].slots[0].values[0].name;
    auto findings = validate_spec(spec);
    REQUIRE(findings.size() == 1);
    CHECK(findings[0].message.find("duplicate") != std::string::npos);
  }
  SUBCASE("pure: identical input gives identical findings") {
    spec.patterns[0].theories.clear();
    auto a = validate_spec(spec);
    auto b = validate_spec(spec);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].path == b[i].path);
      CHECK(a[i].message == b[i].message);
    }
  }
}

TEST_CASE("enumerate_slot_values on fig1 yields 7 ids in slot order") {
  auto ids = enumerate_slot_values(testutil::fig1_spec());
  REQUIRE(ids.size() == 7);
  CHECK(ids[0].slot_path == std::vector<std::string>{"TARGET_GROUP"});
  CHECK(ids[0].value_name == "Race/Ethnicity");
  CHECK(ids[3].value_name == "Disability, Age, Caste/Class");
  CHECK(ids[4].slot_path == std::vector<std::string>{"HATE_EXPRESSION"});
  CHECK(ids[6].value_name == "Dehumanisation/Demonisation");
  CHECK(ids[0].label() == "hbr-1|TARGET_GROUP|Race/Ethnicity");
}

TEST_CASE("nested slots flatten depth-first, leaves only") {
  // 3-node nesting: parent -> {childA(2 leaves), childB(1 leaf)}; expected
  // ids hand-enumerated.
  json doc{
      {"concept_name", "n"},
      {"concept_brief", "b"},
      {"patterns",
       json::array(
           {{{"id", "p1"},
             {"template", "shows [PARENT]."},
             {"key_terms", json::array()},
             {"slots",
              json::array(
                  {{{"name", "PARENT"},
                    {"definition", "d"},
                    {"children",
                     json::array(
                         {{{"name", "CHILD_A"},
                           {"definition", "d"},
                           {"values",
                            json::array({{{"name", "a1"}, {"definition", "d"}},
                                         {{"name", "a2"}, {"definition", "d"}}})}},
                          {{"name", "CHILD_B"},
                           {"definition", "d"},
                           {"values", json::array({{{"name", "b1"},
                                                    {"definition", "d"}}})}}})}}})},
             {"theories",
              json::array({{{"citation", "T"}}})}}})}};
  ConceptSpec spec = parse_spec(doc);
  auto ids = enumerate_slot_values(spec);
  REQUIRE(ids.size() == 3);
  CHECK(ids[0].label() == "p1|PARENT|CHILD_A|a1");
  CHECK(ids[1].label() == "p1|PARENT|CHILD_A|a2");
  CHECK(ids[2].label() == "p1|PARENT|CHILD_B|b1");
}

TEST_CASE("single value spec enumerates to one id") {
  json doc{{"concept_name", "n"},
           {"concept_brief", "b"},
           {"patterns",
            json::array({{{"id", "p"},
                          {"template", "[S]."},
                          {"slots",
                           json::array({{{"name", "S"},
                                         {"definition", "d"},
                                         {"values",
                                          json::array({{{"name", "v"},
                                                        {"definition", "d"}}})}}})},
                          {"theories", json::array({{{"citation", "T"}}})}}})}};
  CHECK(enumerate_slot_values(parse_spec(doc)).size() == 1);
}

TEST_CASE("round-trip property over randomized valid specs") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 50; ++i) {
    ConceptSpec spec = testutil::random_spec(rng);
    ConceptSpec back = parse_spec(serialize_spec(spec));
    CHECK(back == spec);

    size_t leaves = 0;
    for (const Pattern& p : spec.patterns)
      for (const Slot& s : p.slots) {
        leaves += s.values.size();
        for (const Slot& c : s.children) leaves += c.values.size();
      }
    CHECK(enumerate_slot_values(spec).size() == leaves);
  }
}

TEST_CASE("spec hash changes with content") {
  ConceptSpec a = testutil::fig1_spec();
  ConceptSpec b = a;
  CHECK(spec_hash(a) == spec_hash(b));
  b.patterns[0].slots[0].values[0].definition += " changed";
  CHECK(spec_hash(a) != spec_hash(b));
}
