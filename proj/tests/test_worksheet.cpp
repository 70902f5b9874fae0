#include <doctest.h>

#include <algorithm>
#include <random>

#include "consys/worksheet.hpp"

using namespace consys;

namespace {

WorksheetAssessment hbr_multi_assessment() {
  WorksheetAssessment a;
  a.target = "hbr-multi";
  a.assessor = "expert-1";
  a.scores[WorksheetAttribute::clarity] = {1};
  a.scores[WorksheetAttribute::operationalizability] = {2};
  a.scores[WorksheetAttribute::granularity] = {3};
  a.scores[WorksheetAttribute::provenance] = {3};
  a.scores[WorksheetAttribute::completeness] = {4};
  a.scores[WorksheetAttribute::salience] = {4};
  return a;
}

}  // namespace

TEST_CASE("attribute scopes") {
  CHECK(attribute_scope(WorksheetAttribute::clarity) == AttributeScope::spec);
  CHECK(attribute_scope(WorksheetAttribute::operationalizability) ==
        AttributeScope::spec);
  CHECK(attribute_scope(WorksheetAttribute::granularity) == AttributeScope::spec);
  CHECK(attribute_scope(WorksheetAttribute::provenance) == AttributeScope::process);
  CHECK(attribute_scope(WorksheetAttribute::completeness) ==
        AttributeScope::process);
  CHECK(attribute_scope(WorksheetAttribute::salience) == AttributeScope::process);
}

TEST_CASE("score_assessment: process mean matches the published shape") {
  AttributeSummary s = score_assessment(hbr_multi_assessment());
  REQUIRE(s.process_mean.has_value());
  CHECK(*s.process_mean == doctest::Approx(11.0 / 3.0).epsilon(0.01));
  REQUIRE(s.spec_mean.has_value());
  CHECK(*s.spec_mean == doctest::Approx(2.0));
  CHECK(*s.spec_min == 1);
  CHECK(*s.process_min == 3);
}

TEST_CASE("all 5s gives means of 5") {
  WorksheetAssessment a;
  for (WorksheetAttribute attr : kAllAttributes) a.scores[attr] = {5};
  AttributeSummary s = score_assessment(a);
  CHECK(*s.spec_mean == doctest::Approx(5.0));
  CHECK(*s.process_mean == doctest::Approx(5.0));
}

TEST_CASE("direct target: process attributes n/a, mean undefined and flagged") {
  WorksheetAssessment a;
  a.scores[WorksheetAttribute::clarity] = {4};
  a.scores[WorksheetAttribute::operationalizability] = {4};
  a.scores[WorksheetAttribute::granularity] = {3};
  a.scores[WorksheetAttribute::provenance] = {std::nullopt};
  a.scores[WorksheetAttribute::completeness] = {std::nullopt};
  a.scores[WorksheetAttribute::salience] = {std::nullopt};
  AttributeSummary s = score_assessment(a);
  CHECK_FALSE(s.process_mean.has_value());
  CHECK(s.process_not_applicable);
  // adding an n/a never changes a mean
  CHECK(*s.spec_mean == doctest::Approx(11.0 / 3.0));
}

TEST_CASE("score outside 1-5 is rejected") {
  WorksheetAssessment a;
  a.scores[WorksheetAttribute::clarity] = {6};
  CHECK_THROWS(score_assessment(a));
  a.scores[WorksheetAttribute::clarity] = {0};
  CHECK_THROWS(score_assessment(a));
}

TEST_CASE("score_assessment is permutation-invariant over responses") {
  WorksheetAssessment a = hbr_multi_assessment();
  a.responses[WorksheetAttribute::clarity] = {{"clarity.1", "first"},
                                              {"clarity.2", "second"}};
  AttributeSummary before = score_assessment(a);
  std::reverse(a.responses[WorksheetAttribute::clarity].begin(),
               a.responses[WorksheetAttribute::clarity].end());
  AttributeSummary after = score_assessment(a);
  CHECK(*before.spec_mean == *after.spec_mean);
  CHECK(*before.process_mean == *after.process_mean);
}

TEST_CASE("default bank has one question per attribute") {
  QuestionBank bank = default_question_bank();
  for (WorksheetAttribute a : kAllAttributes)
    CHECK(bank.questions.at(a).size() >= 1);
}

TEST_CASE("render produces six sections and round-trips when filled") {
  QuestionBank bank = default_question_bank();
  std::string doc = render_worksheet(bank, "spec-1");
  for (WorksheetAttribute a : kAllAttributes)
    CHECK(doc.find("## " + to_string(a)) != std::string::npos);

  // Empty answers still render and reparse.
  WorksheetAssessment empty = parse_assessment_document(doc);
  CHECK(empty.target == "spec-1");
  CHECK(empty.scores.empty());

  // Fill and round-trip.
  WorksheetAssessment filled = hbr_multi_assessment();
  filled.responses[WorksheetAttribute::clarity] = {
      {"clarity.1", "terms are vague"}};
  std::string filled_doc = render_worksheet(bank, filled.target, &filled);
  WorksheetAssessment back = parse_assessment_document(filled_doc);
  CHECK(back.target == filled.target);
  CHECK(back.assessor == filled.assessor);
  for (WorksheetAttribute a : kAllAttributes)
    CHECK(back.scores.at(a).value == filled.scores.at(a).value);
  CHECK(back.responses.at(WorksheetAttribute::clarity)[0].answer_text ==
        "terms are vague");
}

TEST_CASE("parse_assessment rejects bad scores and missing sections") {
  QuestionBank bank = default_question_bank();
  std::string doc = render_worksheet(bank, "t");
  SUBCASE("score outside range") {
    auto pos = doc.find("Score (1-5 or n/a): ");
    doc.insert(pos + std::string("Score (1-5 or n/a): ").size(), "9");
    CHECK_THROWS(parse_assessment_document(doc));
  }
  SUBCASE("missing attribute section") {
    auto pos = doc.find("## salience");
    doc = doc.substr(0, pos);
    CHECK_THROWS(parse_assessment_document(doc));
  }
}

TEST_CASE("assessment json round-trip") {
  WorksheetAssessment a = hbr_multi_assessment();
  a.scores[WorksheetAttribute::salience] = {std::nullopt};
  WorksheetAssessment back = assessment_from_json(assessment_to_json(a));
  CHECK(back.target == a.target);
  for (WorksheetAttribute attr : kAllAttributes)
    if (a.scores.count(attr))
      CHECK(back.scores.at(attr).value == a.scores.at(attr).value);
}
