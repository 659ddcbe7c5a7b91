#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpacheck/corpus.hpp"

namespace dpacheck::checker {

using corpus::ProvisionCatalog;
using corpus::ProvisionId;

struct SentencePrediction {
  std::string dpa_id;
  std::size_t sentence_index = 0;
  std::string text;
  // Binary mode: union of the per-provision decisions. Multiclass: at most one.
  std::vector<ProvisionId> predicted_labels;
  // Confidence per predicted label; a label without a score counts as 1.
  std::map<std::string, double> scores;
};

struct Support {
  std::size_t sentence_index = 0;
  std::string text;
  double score = 0.0;
  bool operator==(const Support&) const = default;
};

// Every catalog provision appears, possibly with no support.
using Aggregation = std::map<ProvisionId, std::vector<Support>>;

// Supports are sorted by descending score, then ascending sentence index.
// With a confidence floor, labels scoring below it are not counted. Throws
// when the predictions mix DPAs or use labels outside the catalog.
Aggregation aggregate(std::span<const SentencePrediction> predictions,
                      const ProvisionCatalog& catalog,
                      std::optional<double> confidence_floor = std::nullopt);

enum class Status { kSatisfied, kViolated };

struct ProvisionVerdict {
  ProvisionId id;
  std::string title;
  Status status = Status::kViolated;
  std::vector<Support> supporting;
  bool operator==(const ProvisionVerdict&) const = default;
};

struct AuditInfo {
  std::string tool_version;
  std::string model_digest;
  std::string catalog_digest;
  bool operator==(const AuditInfo&) const = default;
};

struct CompletenessReport {
  std::string dpa_id;
  // Catalog order.
  std::vector<ProvisionVerdict> provisions;
  std::size_t satisfied_count = 0;
  std::size_t violation_count = 0;
  bool complete = false;
  AuditInfo audit;

  std::vector<ProvisionId> violations() const;
  std::vector<ProvisionId> satisfied() const;
  bool operator==(const CompletenessReport&) const = default;
};

// A provision is violated exactly when it has no support. The catalog digest
// is filled in when the audit leaves it empty.
CompletenessReport check_completeness(const std::string& dpa_id, const Aggregation& agg,
                                      const ProvisionCatalog& catalog, AuditInfo audit = {});

enum class ReportFormat { kHuman, kMachine };

// Human text lists "VIOLATION <id>" lines first, then "SATISFIED <id>" with
// the supporting excerpts. The machine format is JSON.
std::string render_report(const CompletenessReport& report, ReportFormat format);
CompletenessReport parse_report(std::string_view machine_text);

std::string_view tool_version();

}  // namespace dpacheck::checker
