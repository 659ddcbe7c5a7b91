#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "dpacheck/errors.hpp"
#include "dpacheck/eval.hpp"
#include "dpacheck/random.hpp"
#include "helpers.hpp"

using namespace dpacheck;
using namespace dpacheck::eval;

namespace {

double oracle_f2(double p, double r) { return 5.0 * p * r / (4.0 * p + r); }

// Kappa straight from the 2-rater contingency table.
double oracle_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, double> ma, mb;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1;
    mb[b[i]] += 1;
    agree += a[i] == b[i];
  }
  const double n = static_cast<double>(a.size());
  double pe = 0;
  for (const auto& [k, v] : ma) pe += (v / n) * (mb.count(k) ? mb[k] / n : 0.0);
  return (agree / n - pe) / (1 - pe);
}

std::vector<std::string> bits(std::initializer_list<int> v) {
  std::vector<std::string> out;
  for (int x : v) out.push_back(std::to_string(x));
  return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("F2 at the reported operating points") {
  CHECK(f_beta(0.751, 0.901) == doctest::Approx(oracle_f2(0.751, 0.901)).epsilon(1e-12));
  CHECK(std::abs(f_beta(0.751, 0.901) - 0.866) <= 0.002);
  CHECK(std::abs(f_beta(0.698, 0.966) - 0.897) <= 0.001);
  CHECK(f_beta(1, 1) == 1.0);
  CHECK(f_beta(0.7, 0) == 0.0);
  CHECK(f_beta(0, 0) == 0.0);
  CHECK(f_beta(0.5, 0.5, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("F2 agrees with the oracle on random inputs") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const double p = rng.uniform(0.01, 1), r = rng.uniform(0.01, 1);
    CHECK(f_beta(p, r) == doctest::Approx(oracle_f2(p, r)).epsilon(1e-12));
    CHECK(f_beta(p, r) <= std::max(p, r) + 1e-12);
  }
}

TEST_CASE("DPA confusion examples") {
  const auto cat = testing::catalog();
  const auto hit = dpa_confusion({{"A", {"PO1"}}}, {{"A", {"PO1"}}}, cat);
  CHECK(hit.at("PO1").tp == 1);
  CHECK(hit.at("PO2").tn == 1);
  const auto miss = dpa_confusion({{"A", {"PO1"}}}, {{"A", {}}}, cat);
  CHECK(miss.at("PO1").fn == 1);
  CHECK_THROWS_AS(dpa_confusion({{"A", {}}}, {{"B", {}}}, cat), ValidationError);
}

TEST_CASE("DPA confusion equals per-cell enumeration") {
  const auto cat = testing::catalog();
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    SatisfiedSets gold, pred;
    for (std::string d : {"A", "B", "C"}) {
      gold[d];
      pred[d];
      for (const auto& p : cat.provisions()) {
        if (rng.uniform() < 0.5) gold[d].insert(p.id.str());
        if (rng.uniform() < 0.5) pred[d].insert(p.id.str());
      }
    }
    const auto conf = dpa_confusion(gold, pred, cat);
    std::uint64_t total = 0;
    for (const auto& p : cat.provisions()) {
      Counts expected;
      for (const auto& [d, g] : gold) {
        const bool in_g = g.count(p.id.str()), in_p = pred[d].count(p.id.str());
        expected.tp += in_g && in_p;
        expected.fp += !in_g && in_p;
        expected.fn += in_g && !in_p;
        expected.tn += !in_g && !in_p;
      }
      CHECK(conf.at(p.id.str()) == expected);
      total += conf.at(p.id.str()).total();
    }
    CHECK(total == 19 * 3);
  }
}

TEST_CASE("metrics from counts") {
  const auto row = metrics_from_counts("x", {3, 1, 2, 4});
  CHECK(row.precision == doctest::Approx(0.75));
  CHECK(row.recall == doctest::Approx(0.6));
  CHECK(row.accuracy == doctest::Approx(0.7));
  CHECK(row.f_beta == doctest::Approx(oracle_f2(0.75, 0.6)));
  const auto empty = metrics_from_counts("y", {0, 0, 0, 5});
  CHECK(empty.precision == 0.0);
  CHECK(empty.precision_undefined);
  CHECK(empty.recall_undefined);
  CHECK(empty.f_undefined);
}

TEST_CASE("metrics are scale free and micro F2 follows micro P and R") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    ProvisionConfusion conf, scaled;
    for (int k = 0; k < 5; ++k) {
      Counts c{1 + rng.index(20), rng.index(20), rng.index(20), rng.index(20)};
      Counts s{c.tp * 3, c.fp * 3, c.fn * 3, c.tn * 3};
      conf.per_provision.emplace_back("PO" + std::to_string(k), c);
      scaled.per_provision.emplace_back("PO" + std::to_string(k), s);
    }
    const auto a = compute_metrics(conf), b = compute_metrics(scaled);
    CHECK(a.micro.f_beta == doctest::Approx(b.micro.f_beta).epsilon(1e-12));
    CHECK(a.macro.f_beta == doctest::Approx(b.macro.f_beta).epsilon(1e-12));
    CHECK(a.micro.accuracy == doctest::Approx(b.micro.accuracy).epsilon(1e-12));
    CHECK(a.micro.f_beta == doctest::Approx(oracle_f2(a.micro.precision, a.micro.recall)).epsilon(1e-12));
    for (const auto& r : a.per_provision) {
      CHECK(r.f_beta >= 0.0);
      CHECK(r.f_beta <= 1.0);
    }
  }
}

TEST_CASE("macro averages skip undefined cells") {
  ProvisionConfusion conf;
  conf.per_provision = {{"PO1", {2, 0, 0, 1}}, {"PO2", {0, 0, 0, 3}}};
  const auto m = compute_metrics(conf);
  CHECK(m.macro.precision == 1.0);
  CHECK(m.macro_precision_skipped == 1);
  CHECK(m.macro_f_skipped == 1);
  CHECK(render_metrics_tsv(m).find("PO2") != std::string::npos);
  CHECK(render_metrics_json(m).find("\"macro\"") != std::string::npos);
}

TEST_CASE("sentence-level class counts") {
  const std::vector<std::size_t> gold = {0, 1, 2, 2};
  const std::vector<std::size_t> pred = {0, 2, 2, 1};
  const auto c = class_counts(gold, pred, 3);
  CHECK(c[0] == Counts{1, 0, 0, 3});
  CHECK(c[2] == Counts{1, 1, 1, 1});
}

TEST_CASE("kappa") {
  CHECK(cohen_kappa(bits({1, 1, 0, 0}), bits({1, 0, 0, 0})) == doctest::Approx(0.5));
  CHECK(oracle_kappa(bits({1, 1, 0, 0}), bits({1, 0, 0, 0})) == doctest::Approx(0.5));
  CHECK(cohen_kappa(bits({1, 0, 1, 1}), bits({1, 0, 1, 1})) == 1.0);
  CHECK(cohen_kappa(bits({1, 1}), bits({1, 1})) == 1.0);
  CHECK(cohen_kappa(bits({1, 1}), bits({0, 0})) == 0.0);
  CHECK_THROWS_AS(cohen_kappa(bits({1}), bits({1, 0})), ValidationError);
  CHECK(kappa_band(0.82) == "almost perfect agreement");
  CHECK(kappa_band(0.5) == "moderate agreement");
  CHECK(kappa_band(0.0) == "no agreement");
  CHECK(kappa_band(0.15) == "slight agreement");
}

TEST_CASE("kappa agrees with the contingency oracle") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> a, b;
    const auto n = 5 + rng.index(40);
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(std::to_string(rng.index(3)));
      b.push_back(rng.uniform() < 0.6 ? a.back() : std::to_string(rng.index(3)));
    }
    std::set<std::string> da(a.begin(), a.end());
    if (da.size() < 2) continue;
    const double k = cohen_kappa(a, b);
    CHECK(k == doctest::Approx(oracle_kappa(a, b)).epsilon(1e-12));
    CHECK(k <= 1.0);
    CHECK(k >= -1.0);
    CHECK(cohen_kappa(a, a) == 1.0);
  }
}

TEST_CASE("benchmark timing") {
  int calls = 0;
  const auto t = benchmark_runtime({{"train", "developer", [&] { ++calls; return std::size_t{7}; }},
                                    {"infer", "user", [&] { ++calls; return std::size_t{0}; }}});
  CHECK(calls == 2);
  REQUIRE(t.stages.size() == 2);
  CHECK(t.stages[0].items == 7);
  CHECK(t.stages[1].seconds >= 0.0);
  CHECK(t.perspective_seconds("user") == t.stages[1].seconds);
  CHECK(t.total_seconds >= t.stages[0].seconds);
  CHECK_FALSE(t.machine.empty());
  CHECK(render_benchmark_tsv(t).find("infer") != std::string::npos);
  CHECK(benchmark_runtime({}).total_seconds == 0.0);
}

}  // TEST_SUITE
