#include <doctest.h>

#include <memory>

#include "consys/llm_gateway.hpp"

using namespace consys;

namespace {

RetryPolicy no_backoff() {
  RetryPolicy p;
  p.backoff_base_seconds = 0.0;
  return p;
}

ChatRequest schema_request() {
  ChatRequest req;
  req.model_id = "mock-model";
  req.messages = {{ChatRole::user, "emit the object"}};
  req.output_schema = OutputSchema::object(
      {{"name", OutputSchema::string(false)}, {"count", OutputSchema::integer()}});
  return req;
}

}  // namespace

TEST_CASE("schema validation catalogue") {
  OutputSchema schema = OutputSchema::object(
      {{"items", OutputSchema::array(OutputSchema::string(false), 1)},
       {"kind", OutputSchema::string_enum({"a", "b"})},
       {"flag", OutputSchema::boolean()},
       {"note", OutputSchema::string()}},
      {"note"});

  CHECK(schema.validate({{"items", {"x"}}, {"kind", "a"}, {"flag", true}}).empty());
  CHECK(schema
            .validate({{"items", {"x"}}, {"kind", "b"}, {"flag", false},
                       {"note", ""}})
            .empty());

  SUBCASE("missing required field") {
    auto errs = schema.validate({{"kind", "a"}, {"flag", true}});
    REQUIRE(!errs.empty());
    CHECK(errs[0].find("items") != std::string::npos);
  }
  SUBCASE("unknown field rejected") {
    auto errs =
        schema.validate({{"items", {"x"}}, {"kind", "a"}, {"flag", true},
                         {"extra", 1}});
    CHECK(!errs.empty());
  }
  SUBCASE("empty array below min_items") {
    auto errs = schema.validate(
        {{"items", json::array()}, {"kind", "a"}, {"flag", true}});
    CHECK(!errs.empty());
  }
  SUBCASE("enum violation") {
    auto errs =
        schema.validate({{"items", {"x"}}, {"kind", "z"}, {"flag", true}});
    CHECK(!errs.empty());
  }
  SUBCASE("wrong type carries a path") {
    auto errs =
        schema.validate({{"items", {1}}, {"kind", "a"}, {"flag", true}});
    REQUIRE(!errs.empty());
    CHECK(errs[0].find("items[0]") != std::string::npos);
  }
  SUBCASE("describe names every field") {
    std::string desc = schema.describe().dump();
    for (const char* f : {"items", "kind", "flag", "note"})
      CHECK(desc.find(f) != std::string::npos);
  }
}

TEST_CASE("extract_json_reply tolerates fences and prose") {
  CHECK(extract_json_reply(R"({"a":1})")["a"] == 1);
  CHECK(extract_json_reply("```json\n{\"a\": 2}\n```")["a"] == 2);
  CHECK(extract_json_reply("Sure, here it is:\n```\n{\"a\":3}\n```\nDone.")["a"] ==
        3);
  CHECK_THROWS(extract_json_reply("no json here"));
}

TEST_CASE("valid first reply: exactly one provider call, one transcript record") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<std::string>{R"({"name":"x","count":3})"});
  Gateway gw(mock, no_backoff());
  std::vector<json> records;
  gw.set_transcript_sink([&](const json& r) { records.push_back(r); });

  TranscriptRecord out = gw.complete_structured(schema_request());
  CHECK(mock->replies_consumed() == 1);
  CHECK(out.attempt_count == 1);
  REQUIRE(out.parsed.has_value());
  CHECK((*out.parsed)["count"] == 3);
  CHECK(records.size() == 1);
}

TEST_CASE("invalid then valid: repair round-trip carries the errors") {
  auto mock = std::make_shared<MockProvider>(std::vector<std::string>{
      R"({"name":"x"})", R"({"name":"x","count":5})"});
  Gateway gw(mock, no_backoff());
  std::vector<json> records;
  gw.set_transcript_sink([&](const json& r) { records.push_back(r); });

  TranscriptRecord out = gw.complete_structured(schema_request());
  CHECK(mock->replies_consumed() == 2);
  CHECK(out.attempt_count == 2);
  CHECK((*out.parsed)["count"] == 5);
  CHECK(records.size() == 2);

  // Repair prompt includes the failing reply and the validation errors.
  REQUIRE(mock->requests().size() == 2);
  const auto& repair = mock->requests()[1].messages;
  bool mentions_count = false;
  for (const auto& m : repair)
    if (m.content.find("count") != std::string::npos) mentions_count = true;
  CHECK(mentions_count);
}

TEST_CASE("two invalid replies fail with a schema error") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<std::string>{R"({"name":"x"})", R"({"count":"no"})"});
  Gateway gw(mock, no_backoff());
  try {
    gw.complete_structured(schema_request());
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayErrorKind::schema);
  }
  CHECK(mock->replies_consumed() == 2);
}

TEST_CASE("script exhaustion surfaces as its own error kind") {
  auto mock = std::make_shared<MockProvider>(std::vector<std::string>{});
  Gateway gw(mock, no_backoff());
  ChatRequest req;
  req.messages = {{ChatRole::user, "hi"}};
  try {
    gw.complete(req);
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayErrorKind::script_exhausted);
  }
}

namespace {

/// Fails with transport errors a fixed number of times, then succeeds.
class FlakyProvider : public Provider {
public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  std::string complete(const ChatRequest&) override {
    ++calls_;
    if (failures_-- > 0)
      throw GatewayError(GatewayErrorKind::transport, "connection reset");
    return "ok";
  }
  std::string name() const override { return "flaky"; }
  int calls() const { return calls_; }

private:
  int failures_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("transport errors are retried up to the policy limit") {
  ChatRequest req;
  req.messages = {{ChatRole::user, "hi"}};

  SUBCASE("recovers within budget") {
    auto flaky = std::make_shared<FlakyProvider>(2);
    Gateway gw(flaky, no_backoff());
    TranscriptRecord out = gw.complete(req);
    CHECK(out.response_text == "ok");
    CHECK(flaky->calls() == 3);
  }
  SUBCASE("exhausts budget and rethrows transport") {
    auto flaky = std::make_shared<FlakyProvider>(10);
    Gateway gw(flaky, no_backoff());
    try {
      gw.complete(req);
      FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
      CHECK(e.kind() == GatewayErrorKind::transport);
    }
    CHECK(flaky->calls() == 4);  // initial try + 3 retries
  }
  SUBCASE("refusal is not retried") {
    struct Refuser : Provider {
      int calls = 0;
      std::string complete(const ChatRequest&) override {
        ++calls;
        throw GatewayError(GatewayErrorKind::refusal, "declined");
      }
      std::string name() const override { return "refuser"; }
    };
    auto refuser = std::make_shared<Refuser>();
    Gateway gw(refuser, no_backoff());
    CHECK_THROWS_AS(gw.complete(req), GatewayError);
    CHECK(refuser->calls == 1);
  }
}

TEST_CASE("transcript records every attempt including failures") {
  auto flaky = std::make_shared<FlakyProvider>(1);
  Gateway gw(flaky, no_backoff());
  std::vector<json> records;
  gw.set_transcript_sink([&](const json& r) { records.push_back(r); });
  ChatRequest req;
  req.messages = {{ChatRole::user, "hi"}};
  gw.complete(req);
  CHECK(records.size() == 2);
  for (const json& r : records) {
    CHECK(r.contains("request"));
    CHECK(r.contains("timestamp"));
  }
}
