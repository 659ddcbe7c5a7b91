#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dpacheck::corpus {

// Provision identifier such as "PO1": one or more ASCII letters followed by
// one or more digits.
class ProvisionId {
 public:
  ProvisionId() = default;
  explicit ProvisionId(std::string value);

  const std::string& str() const { return value_; }
  static bool is_valid(std::string_view value);

  auto operator<=>(const ProvisionId&) const = default;

 private:
  std::string value_;
};

struct Provision {
  ProvisionId id;
  std::string title;
  std::string description;
};

// Label used for sentences satisfying no provision.
inline constexpr std::string_view kOtherLabel = "other";

// Ordered provision list. The order defines class indices everywhere.
class ProvisionCatalog {
 public:
  ProvisionCatalog() = default;
  ProvisionCatalog(std::string regulation_name, std::vector<Provision> provisions);

  const std::string& regulation_name() const { return regulation_name_; }
  const std::vector<Provision>& provisions() const { return provisions_; }
  std::size_t size() const { return provisions_.size(); }
  const Provision& at(std::size_t i) const { return provisions_.at(i); }

  std::optional<std::size_t> index_of(const ProvisionId& id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  // Throws ValidationError("unknown provision <id>").
  std::size_t require(std::string_view id) const;

  // Digest of the canonical serialization, for report audit fields.
  std::string digest() const;

 private:
  std::string regulation_name_;
  std::vector<Provision> provisions_;
};

ProvisionCatalog parse_catalog(std::string_view json_text,
                               const std::string& source = "<catalog>");
ProvisionCatalog load_catalog(const std::string& path);
std::string catalog_to_json(const ProvisionCatalog& catalog);

struct Sentence {
  std::string dpa_id;
  std::size_t sentence_index = 0;
  std::string text;
  // Sorted by catalog order, no duplicates.
  std::vector<ProvisionId> gold_labels;

  bool satisfies_any() const { return !gold_labels.empty(); }
  bool satisfies(const ProvisionId& id) const;

  bool operator==(const Sentence&) const = default;
};

struct Dpa {
  std::string dpa_id;
  std::vector<Sentence> sentences;
};

// Corpus-level counts a ground-truth file may claim in its metadata record.
// When present they are checked against the loaded data.
struct ReportedShape {
  std::optional<std::size_t> dpas;
  std::optional<std::size_t> sentences;
  std::optional<std::size_t> positives;
};

struct LabeledCorpus {
  ProvisionCatalog catalog;
  std::vector<Dpa> dpas;
  std::string provenance;

  std::size_t sentence_count() const;
  std::size_t positive_count() const;
  const Dpa* find(std::string_view dpa_id) const;

  // Enforces every corpus invariant; throws ValidationError.
  void validate() const;
};

// Line-delimited ground truth. One JSON object per line:
//   {"dpa_id": "...", "sentence_index": 0, "text": "...", "labels": ["PO1"]}
// An optional first line {"meta": {"provenance": ..., "dpas": N,
// "sentences": N, "positives": N}} carries provenance and claimed counts.
// Sentences are grouped per DPA and ordered by sentence_index; DPAs keep the
// order of first appearance.
LabeledCorpus parse_ground_truth(std::istream& in, const ProvisionCatalog& catalog,
                                 const std::string& source = "<ground-truth>");
LabeledCorpus load_ground_truth(const std::string& path,
                                const ProvisionCatalog& catalog);
LabeledCorpus load_ground_truth(const std::string& path,
                                const std::string& catalog_path);

// Canonical serialization (inverse of parse_ground_truth).
void write_ground_truth(const LabeledCorpus& corpus, std::ostream& out);
void save_ground_truth(const LabeledCorpus& corpus, const std::string& path);

// Verifies claimed counts; throws ValidationError naming the first mismatch.
void check_reported_shape(const LabeledCorpus& corpus, const ReportedShape& claim);

struct SplitSpec {
  std::uint64_t seed = 0;
  double dev_fraction = 0.70;
  double val_fraction_of_dev = 0.20;
};

struct CorpusSplit {
  LabeledCorpus dev;
  LabeledCorpus eval;
  LabeledCorpus train;
  LabeledCorpus val;
};

// Whole-DPA split. DPA ids are sorted, shuffled with the seed and cut:
// the first round(dev_fraction * n) are dev, of which the last
// round(val_fraction_of_dev * |dev|) are val. Each part lists its DPAs in
// id order.
CorpusSplit split_dpas(const LabeledCorpus& corpus, const SplitSpec& spec);

struct StatsTable {
  std::size_t total_dpas = 0;
  std::size_t total_sentences = 0;
  std::size_t positive_sentences = 0;
  std::size_t multi_labeled_sentences = 0;
  double positive_fraction = 0.0;
  // Catalog order.
  std::vector<std::pair<ProvisionId, std::size_t>> per_provision;

  std::size_t count(std::string_view id) const;
};

StatsTable corpus_stats(const LabeledCorpus& corpus);
std::string render_stats_tsv(const StatsTable& stats);

}  // namespace dpacheck::corpus
