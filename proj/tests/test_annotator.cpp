#include <doctest.h>

#include <memory>
#include <set>

#include "consys/annotator.hpp"
#include "test_util.hpp"

using namespace consys;

namespace {

/// Reply asserting exactly the given column indexes, each with a rationale.
std::string annotation_reply(size_t n_columns, const std::set<size_t>& on,
                             const std::string& rationale = "it plainly applies") {
  json j = json::object();
  for (size_t i = 0; i < n_columns; ++i) {
    json field{{"applies", on.count(i) > 0}};
    if (on.count(i)) field["rationale"] = rationale;
    j[annotation_field_name(i)] = field;
  }
  return j.dump();
}

ConceptSpec single_choice_fig1() {
  json doc = serialize_spec(testutil::fig1_spec());
  doc["patterns"][0]["slots"][0]["topology"] = "single_choice";
  return parse_spec(doc);
}

Gateway make_gateway(std::shared_ptr<MockProvider>& mock,
                     std::vector<std::string> script) {
  mock = std::make_shared<MockProvider>(std::move(script));
  return Gateway(mock, {0, 0.0, 1.0});
}

}  // namespace

TEST_CASE("annotation schema has one field pair per leaf value") {
  ConceptSpec spec = testutil::fig1_spec();
  OutputSchema schema = build_annotation_schema(spec);

  json good = json::parse(annotation_reply(7, {0, 5}));
  CHECK(schema.validate(good).empty());

  SUBCASE("missing field rejected") {
    good.erase("v3");
    CHECK(!schema.validate(good).empty());
  }
  SUBCASE("extra field rejected") {
    good["v7"] = {{"applies", false}};
    CHECK(!schema.validate(good).empty());
  }
  SUBCASE("rationale optional when absent") {
    CHECK(good.at("v1").contains("rationale") == false);
    CHECK(schema.validate(good).empty());
  }
}

TEST_CASE("nested specs annotate leaves only") {
  json doc{{"concept_name", "n"},
           {"concept_brief", "b"},
           {"patterns",
            json::array({{{"id", "p"},
                          {"template", "[S]."},
                          {"key_terms", json::array()},
                          {"slots",
                           json::array({{{"name", "S"},
                                         {"definition", "d"},
                                         {"children",
                                          json::array({{{"name", "C"},
                                                        {"definition", "d"},
                                                        {"values",
                                                         json::array(
                                                             {{{"name", "x"},
                                                               {"definition", "d"}},
                                                              {{"name", "y"},
                                                               {"definition", "d"}}})}}})}}})},
                          {"theories", json::array({{{"citation", "T"}}})}}})}};
  ConceptSpec spec = parse_spec(doc);
  json reply = json::parse(annotation_reply(2, {1}));
  CHECK(build_annotation_schema(spec).validate(reply).empty());
}

TEST_CASE("annotate_sample maps fields onto columns") {
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(mock, {annotation_reply(7, {0, 4})});
  Sample s{"s1", "some text to judge", {}};
  auto js = annotate_sample(gw, s, testutil::fig1_spec(), {});
  REQUIRE(js.size() == 7);
  CHECK(js[0].applies);
  CHECK(js[4].applies);
  CHECK(!js[1].applies);
  CHECK(js[0].rationale == "it plainly applies");
  CHECK(js[1].rationale.empty());
  CHECK(mock->replies_consumed() == 1);

  // The prompt shows the spec and the field mapping.
  const auto& msg = mock->requests()[0].messages[1].content;
  CHECK(msg.find("v6 = hbr-1|HATE_EXPRESSION|Dehumanisation/Demonisation") !=
        std::string::npos);
  CHECK(msg.find("some text to judge") != std::string::npos);
}

TEST_CASE("context turns precede the text under judgment") {
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(mock, {annotation_reply(7, {})});
  Sample s{"s1", "final reply", {{"user", "earlier question"}}};
  annotate_sample(gw, s, testutil::fig1_spec(), {});
  const auto& msg = mock->requests()[0].messages[1].content;
  CHECK(msg.find("earlier question") != std::string::npos);
  CHECK(msg.find("earlier question") < msg.find("final reply"));
}

TEST_CASE("rationales longer than 280 chars are truncated") {
  std::shared_ptr<MockProvider> mock;
  Gateway gw =
      make_gateway(mock, {annotation_reply(7, {2}, std::string(400, 'x'))});
  Sample s{"s1", "text", {}};
  auto js = annotate_sample(gw, s, testutil::fig1_spec(), {});
  CHECK(js[2].rationale.size() == 280);
}

TEST_CASE("positive judgment without rationale is a schema failure") {
  json j = json::parse(annotation_reply(7, {}));
  j["v0"]["applies"] = true;  // no rationale
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(mock, {j.dump(), j.dump()});
  Sample s{"s1", "text", {}};
  CHECK_THROWS_AS(annotate_sample(gw, s, testutil::fig1_spec(), {}),
                  GatewayError);
}

TEST_CASE("single-choice violation: re-prompt fixes it, no repair event") {
  ConceptSpec spec = single_choice_fig1();
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(
      mock, {annotation_reply(7, {0, 1}), annotation_reply(7, {0})});
  Sample s{"s1", "text", {}};
  std::vector<RepairEvent> repairs;
  auto js = annotate_sample(gw, s, spec, {}, &repairs);
  CHECK(mock->replies_consumed() == 2);
  CHECK(js[0].applies);
  CHECK(!js[1].applies);
  CHECK(repairs.empty());
}

TEST_CASE("single-choice violation persists: first asserted value kept") {
  ConceptSpec spec = single_choice_fig1();
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(
      mock, {annotation_reply(7, {1, 3}), annotation_reply(7, {1, 3})});
  Sample s{"s1", "text", {}};
  std::vector<RepairEvent> repairs;
  auto js = annotate_sample(gw, s, spec, {}, &repairs);
  CHECK(js[1].applies);
  CHECK(!js[3].applies);
  CHECK(js[3].rationale.empty());
  REQUIRE(repairs.size() == 1);
  CHECK(repairs[0].sample_id == "s1");
  CHECK(repairs[0].dropped_values ==
        std::vector<std::string>{"Disability, Age, Caste/Class"});
}

TEST_CASE("multi_label slots never trigger repair") {
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(mock, {annotation_reply(7, {0, 1, 2, 3})});
  Sample s{"s1", "text", {}};
  std::vector<RepairEvent> repairs;
  auto js = annotate_sample(gw, s, testutil::fig1_spec(), {}, &repairs);
  CHECK(mock->replies_consumed() == 1);
  CHECK(repairs.empty());
  CHECK(js[3].applies);
}

TEST_CASE("annotate_dataset assembles a binary matrix in sample order") {
  std::vector<std::string> script;
  script.push_back(annotation_reply(7, {0, 4}));
  script.push_back(annotation_reply(7, {}));
  script.push_back(annotation_reply(7, {1, 5}));
  script.push_back(annotation_reply(7, {2, 6}));
  std::shared_ptr<MockProvider> mock;
  Gateway gw = make_gateway(mock, script);

  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i)
    samples.push_back({"s" + std::to_string(i), "text " + std::to_string(i), {}});
  ConceptSpec spec = testutil::fig1_spec();
  AnnotationMatrix m = annotate_dataset(gw, samples, spec, {"model-x"});

  CHECK(m.spec_name == spec.concept_name);
  CHECK(m.spec_hash == spec_hash(spec));
  CHECK(m.annotator_model_id == "model-x");
  REQUIRE(m.rows.size() == 4);
  REQUIRE(m.columns.size() == 7);
  CHECK(m.sample_ids == std::vector<std::string>{"s0", "s1", "s2", "s3"});
  CHECK(m.rows[0] == std::vector<uint8_t>{1, 0, 0, 0, 1, 0, 0});
  CHECK(m.rows[1] == std::vector<uint8_t>{0, 0, 0, 0, 0, 0, 0});
  CHECK(m.rows[2] == std::vector<uint8_t>{0, 1, 0, 0, 0, 1, 0});
  CHECK(m.missing_sample_ids.empty());
  CHECK(m.repair_events.empty());

  SUBCASE("json round-trip preserves everything downstream needs") {
    AnnotationMatrix back = matrix_from_json(matrix_to_json(m));
    CHECK(back.spec_hash == m.spec_hash);
    REQUIRE(back.columns.size() == 7);
    for (size_t c = 0; c < 7; ++c)
      CHECK(back.columns[c].label() == m.columns[c].label());
    CHECK(back.rows == m.rows);
    CHECK(back.sample_ids == m.sample_ids);
  }
}

TEST_CASE("failed rows within budget become missing; beyond it the run aborts") {
  auto bad = std::string("{}");  // schema-invalid twice in a row
  std::vector<Sample> samples;
  for (int i = 0; i < 10; ++i)
    samples.push_back({"s" + std::to_string(i), "text", {}});
  ConceptSpec spec = testutil::fig1_spec();

  SUBCASE("one failure out of ten is tolerated") {
    std::vector<std::string> script;
    for (int i = 0; i < 10; ++i) {
      if (i == 3) {
        script.push_back(bad);
        script.push_back(bad);
      } else {
        script.push_back(annotation_reply(7, {}));
      }
    }
    std::shared_ptr<MockProvider> mock;
    Gateway gw = make_gateway(mock, script);
    AnnotationMatrix m = annotate_dataset(gw, samples, spec, {});
    CHECK(m.rows.size() == 9);
    CHECK(m.missing_sample_ids == std::vector<std::string>{"s3"});
  }

  SUBCASE("two failures out of ten abort the run") {
    std::vector<std::string> script;
    for (int i = 0; i < 10; ++i) {
      if (i == 3 || i == 4) {
        script.push_back(bad);
        script.push_back(bad);
      } else {
        script.push_back(annotation_reply(7, {}));
      }
    }
    std::shared_ptr<MockProvider> mock;
    Gateway gw = make_gateway(mock, script);
    CHECK_THROWS_AS(annotate_dataset(gw, samples, spec, {}), std::runtime_error);
  }
}

TEST_CASE("matrix check rejects malformed input") {
  AnnotationMatrix m;
  m.spec_hash = "h";
  m.columns = enumerate_slot_values(testutil::fig1_spec());
  m.sample_ids = {"a"};
  m.rows = {{1, 0, 0}};  // wrong width
  CHECK_THROWS(m.check());
  m.rows = {{1, 0, 0, 0, 0, 0, 2}};  // non-binary
  CHECK_THROWS(m.check());
  m.rows = {{1, 0, 0, 0, 0, 0, 1}};
  CHECK_NOTHROW(m.check());
}
