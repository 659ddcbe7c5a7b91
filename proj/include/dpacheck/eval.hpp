#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dpacheck/corpus.hpp"

namespace dpacheck::eval {

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  Counts& operator+=(const Counts& o);
  bool operator==(const Counts&) const = default;
};

// Per provision, counted over DPAs.
struct ProvisionConfusion {
  std::vector<std::pair<std::string, Counts>> per_provision;  // catalog order
  std::size_t dpas = 0;

  const Counts& at(std::string_view provision) const;
};

// Per-DPA satisfied provision sets, keyed by dpa_id.
using SatisfiedSets = std::map<std::string, std::set<std::string>>;

// TP if a provision is in both sets, FP if predicted only, FN if gold only,
// TN if neither. Throws ValidationError when the DPA ids differ.
ProvisionConfusion dpa_confusion(const SatisfiedSets& gold, const SatisfiedSets& predicted,
                                 const corpus::ProvisionCatalog& catalog);

// Gold satisfied sets of a labeled corpus.
SatisfiedSets satisfied_sets(const corpus::LabeledCorpus& corpus);

struct MetricRow {
  std::string label;
  Counts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  // A ratio with an empty denominator is reported as 0 and flagged.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f_undefined = false;
};

struct MetricsSummary {
  double beta = 2.0;
  std::vector<MetricRow> per_provision;
  MetricRow micro;
  MetricRow macro;
  // Provisions left out of the macro precision / recall / F averages because
  // the ratio was undefined for them.
  std::size_t macro_precision_skipped = 0;
  std::size_t macro_recall_skipped = 0;
  std::size_t macro_f_skipped = 0;
};

// (1 + b^2) P R / (b^2 P + R); 0 when P = R = 0.
double f_beta(double precision, double recall, double beta = 2.0);

MetricRow metrics_from_counts(std::string label, const Counts& counts, double beta = 2.0);

// Micro averages pool the counts; macro averages are unweighted means over
// provisions, skipping flagged cells.
MetricsSummary compute_metrics(const ProvisionConfusion& confusion, double beta = 2.0);

// One-vs-rest counts per class from sentence-level gold/predicted class
// indices.
std::vector<Counts> class_counts(std::span<const std::size_t> gold,
                                 std::span<const std::size_t> predicted, std::size_t num_classes);

std::string render_metrics_tsv(const MetricsSummary& summary);
std::string render_metrics_json(const MetricsSummary& summary);

// kappa = (p_o - p_e) / (1 - p_e) with p_e from the two raters' marginals.
// When p_e == 1, kappa is 1 if p_o == 1; otherwise ValidationError.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

// <= 0 none, .01-.20 slight, .21-.40 fair, .41-.60 moderate,
// .61-.80 substantial, .81-1 almost perfect.
std::string kappa_band(double kappa);

struct Stage {
  std::string name;
  // "developer" (training) or "user" (inference).
  std::string perspective;
  // Runs the stage and returns the number of items it processed.
  std::function<std::size_t()> run;
};

struct StageTiming {
  std::string name;
  std::string perspective;
  double seconds = 0.0;
  std::size_t items = 0;
};

struct BenchmarkTable {
  std::vector<StageTiming> stages;
  double total_seconds = 0.0;
  std::string machine;

  double perspective_seconds(std::string_view perspective) const;
};

// Runs stages in order on the calling thread, timing each with a steady clock.
BenchmarkTable benchmark_runtime(const std::vector<Stage>& stages);

std::string machine_descriptor();
std::string render_benchmark_tsv(const BenchmarkTable& table);

}  // namespace dpacheck::eval
