#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "dpacheck/checker.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/random.hpp"
#include "helpers.hpp"

using namespace dpacheck;
using namespace dpacheck::checker;

namespace {

SentencePrediction pred(std::size_t idx, std::vector<std::string> labels, double score = 1.0) {
  SentencePrediction p{"D", idx, "sentence " + std::to_string(idx), {}, {}};
  for (const auto& l : labels) {
    p.predicted_labels.emplace_back(l);
    p.scores[l] = score;
  }
  return p;
}

std::size_t count_lines(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST_SUITE("checker") {

TEST_CASE("aggregation orders supports by score then index") {
  const auto cat = testing::catalog();
  const std::vector<SentencePrediction> p = {pred(4, {"PO1"}, 0.6), pred(1, {"PO1"}, 0.9),
                                             pred(2, {"PO1"}, 0.6)};
  const auto agg = aggregate(p, cat);
  CHECK(agg.size() == 19);
  const auto& s = agg.at(corpus::ProvisionId("PO1"));
  REQUIRE(s.size() == 3);
  CHECK(s[0].sentence_index == 1);
  CHECK(s[1].sentence_index == 2);
  CHECK(s[2].sentence_index == 4);
  CHECK(aggregate(std::vector<SentencePrediction>{}, cat).at(corpus::ProvisionId("PO7")).empty());
}

TEST_CASE("aggregation equals brute-force regrouping") {
  const auto cat = testing::catalog();
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SentencePrediction> p;
    for (std::size_t i = 0; i < 30; ++i) {
      std::vector<std::string> labels;
      for (std::size_t k = 1; k <= 19; ++k) {
        if (rng.uniform() < 0.08) labels.push_back("PO" + std::to_string(k));
      }
      p.push_back(pred(i, labels, rng.uniform()));
    }
    const auto agg = aggregate(p, cat);
    for (std::size_t k = 1; k <= 19; ++k) {
      const auto id = "PO" + std::to_string(k);
      std::set<std::size_t> expected, got;
      for (const auto& s : p) {
        for (const auto& l : s.predicted_labels) {
          if (l.str() == id) expected.insert(s.sentence_index);
        }
      }
      for (const auto& s : agg.at(corpus::ProvisionId(id))) got.insert(s.sentence_index);
      CHECK(got == expected);
    }
  }
}

TEST_CASE("aggregation rejects mixed DPAs and unknown labels") {
  const auto cat = testing::catalog();
  auto other = pred(1, {"PO1"});
  other.dpa_id = "E";
  const std::vector<SentencePrediction> mixed = {pred(0, {"PO1"}), other};
  CHECK_THROWS_AS(aggregate(mixed, cat), ValidationError);
  const std::vector<SentencePrediction> unknown = {pred(0, {"PO99"})};
  CHECK_THROWS_AS(aggregate(unknown, cat), ValidationError);
}

TEST_CASE("confidence floor drops weak support") {
  const auto cat = testing::catalog();
  const std::vector<SentencePrediction> p = {pred(0, {"PO1"}, 0.3), pred(1, {"PO2"}, 0.8)};
  const auto agg = aggregate(p, cat, 0.5);
  CHECK(agg.at(corpus::ProvisionId("PO1")).empty());
  CHECK(agg.at(corpus::ProvisionId("PO2")).size() == 1);
}

TEST_CASE("verdicts") {
  const auto cat = testing::catalog();
  std::vector<SentencePrediction> all;
  for (std::size_t k = 1; k <= 19; ++k) all.push_back(pred(k, {"PO" + std::to_string(k)}));
  const auto complete = check_completeness("D", aggregate(all, cat), cat);
  CHECK(complete.complete);
  CHECK(complete.violation_count == 0);
  CHECK(complete.satisfied_count == 19);

  const auto empty = check_completeness("D", aggregate(std::vector<SentencePrediction>{}, cat), cat);
  CHECK_FALSE(empty.complete);
  CHECK(empty.violation_count == 19);

  const std::vector<SentencePrediction> two = {pred(0, {"PO1"}), pred(1, {"PO3"})};
  const auto partial = check_completeness("D", aggregate(two, cat), cat);
  // Oracle: catalog minus {PO1, PO3}, in catalog order.
  std::vector<corpus::ProvisionId> expected;
  for (const auto& p : cat.provisions()) {
    if (p.id.str() != "PO1" && p.id.str() != "PO3") expected.push_back(p.id);
  }
  CHECK(partial.violations() == expected);
  CHECK(partial.violation_count == 17);
  CHECK(partial.satisfied() == std::vector<corpus::ProvisionId>{corpus::ProvisionId("PO1"), corpus::ProvisionId("PO3")});
  CHECK(count_lines(render_report(partial, ReportFormat::kHuman), "VIOLATION ") == 17);
}

TEST_CASE("adding a prediction never removes a satisfied verdict") {
  const auto cat = testing::catalog();
  Rng rng(5);
  std::vector<SentencePrediction> p;
  auto before = check_completeness("D", aggregate(p, cat), cat);
  for (std::size_t i = 0; i < 40; ++i) {
    p.push_back(pred(i, {"PO" + std::to_string(1 + rng.index(19))}, rng.uniform()));
    const auto after = check_completeness("D", aggregate(p, cat), cat);
    for (const auto& id : before.satisfied()) {
      const auto s = after.satisfied();
      CHECK(std::find(s.begin(), s.end(), id) != s.end());
    }
    before = after;
  }
}

TEST_CASE("verdicts ignore scores") {
  const auto cat = testing::catalog();
  const std::vector<SentencePrediction> lo = {pred(0, {"PO2"}, 0.01)};
  const std::vector<SentencePrediction> hi = {pred(0, {"PO2"}, 0.99)};
  CHECK(check_completeness("D", aggregate(lo, cat), cat).violations() ==
        check_completeness("D", aggregate(hi, cat), cat).violations());
}

TEST_CASE("human rendering") {
  const auto cat = testing::catalog();
  std::vector<SentencePrediction> all;
  for (std::size_t k = 1; k <= 19; ++k) all.push_back(pred(k, {"PO" + std::to_string(k)}));
  const auto text = render_report(check_completeness("D", aggregate(all, cat), cat), ReportFormat::kHuman);
  CHECK(count_lines(text, "COMPLETE: yes") == 1);
  CHECK(count_lines(text, "VIOLATION") == 0);
  CHECK(count_lines(text, "SATISFIED ") == 19);
  CHECK(text.find("sentence 7") != std::string::npos);

  const std::vector<SentencePrediction> one = {pred(0, {"PO5"})};
  const auto partial = render_report(check_completeness("D", aggregate(one, cat), cat), ReportFormat::kHuman);
  CHECK(count_lines(partial, "COMPLETE: no") == 1);
  // Violations are listed before satisfied provisions.
  CHECK(partial.find("VIOLATION ") < partial.find("SATISFIED "));
}

TEST_CASE("machine rendering round trips") {
  const auto cat = testing::catalog();
  const std::vector<SentencePrediction> p = {pred(3, {"PO1", "PO4"}, 0.75), pred(9, {"PO4"}, 0.5)};
  AuditInfo audit{"", "abc123", ""};
  const auto r = check_completeness("DPA-9", aggregate(p, cat), cat, audit);
  CHECK(r.audit.tool_version == std::string(tool_version()));
  CHECK(r.audit.catalog_digest == cat.digest());
  CHECK(r.audit.model_digest == "abc123");
  CHECK(parse_report(render_report(r, ReportFormat::kMachine)) == r);
  CHECK_THROWS(parse_report("{not json"));
}

}  // TEST_SUITE
