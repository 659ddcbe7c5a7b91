#include "dpacheck/checker.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "dpacheck/errors.hpp"

namespace dpacheck::checker {

std::string_view tool_version() { return DPACHECK_VERSION; }

Aggregation aggregate(std::span<const SentencePrediction> predictions,
                      const ProvisionCatalog& catalog, std::optional<double> confidence_floor) {
  Aggregation agg;
  for (const auto& p : catalog.provisions()) agg[p.id];
  for (const auto& pred : predictions) {
    if (pred.dpa_id != predictions.front().dpa_id) {
      throw ValidationError("predictions mix DPAs " + predictions.front().dpa_id + " and " +
                            pred.dpa_id);
    }
    for (const auto& label : pred.predicted_labels) {
      catalog.require(label.str());
      const auto it = pred.scores.find(label.str());
      const double score = it == pred.scores.end() ? 1.0 : it->second;
      if (confidence_floor && score < *confidence_floor) continue;
      agg[label].push_back({pred.sentence_index, pred.text, score});
    }
  }
  for (auto& [id, supports] : agg) {
    std::stable_sort(supports.begin(), supports.end(), [](const Support& a, const Support& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.sentence_index < b.sentence_index;
    });
  }
  return agg;
}

std::vector<ProvisionId> CompletenessReport::violations() const {
  std::vector<ProvisionId> out;
  for (const auto& v : provisions) {
    if (v.status == Status::kViolated) out.push_back(v.id);
  }
  return out;
}

std::vector<ProvisionId> CompletenessReport::satisfied() const {
  std::vector<ProvisionId> out;
  for (const auto& v : provisions) {
    if (v.status == Status::kSatisfied) out.push_back(v.id);
  }
  return out;
}

CompletenessReport check_completeness(const std::string& dpa_id, const Aggregation& agg,
                                      const ProvisionCatalog& catalog, AuditInfo audit) {
  CompletenessReport report;
  report.dpa_id = dpa_id;
  for (const auto& p : catalog.provisions()) {
    ProvisionVerdict v{p.id, p.title, Status::kViolated, {}};
    if (auto it = agg.find(p.id); it != agg.end()) v.supporting = it->second;
    if (!v.supporting.empty()) {
      v.status = Status::kSatisfied;
      ++report.satisfied_count;
    } else {
      ++report.violation_count;
    }
    report.provisions.push_back(std::move(v));
  }
  report.complete = report.violation_count == 0;
  if (audit.tool_version.empty()) audit.tool_version = std::string(tool_version());
  if (audit.catalog_digest.empty()) audit.catalog_digest = catalog.digest();
  report.audit = std::move(audit);
  return report;
}

namespace {

std::string render_human(const CompletenessReport& r) {
  std::ostringstream out;
  out << "DPA: " << r.dpa_id << "\n";
  out << "COMPLETE: " << (r.complete ? "yes" : "no") << "\n";
  out << "satisfied " << r.satisfied_count << ", violated " << r.violation_count << " of "
      << r.provisions.size() << " provisions\n\n";
  for (const auto& v : r.provisions) {
    if (v.status == Status::kViolated) {
      out << "VIOLATION " << v.id.str() << ": " << v.title << "\n";
    }
  }
  if (r.violation_count > 0) out << "\n";
  for (const auto& v : r.provisions) {
    if (v.status != Status::kSatisfied) continue;
    out << "SATISFIED " << v.id.str() << ": " << v.title << "\n";
    for (const auto& s : v.supporting) {
      out << "    [" << s.sentence_index << "] (" << s.score << ") " << s.text << "\n";
    }
  }
  out << "\ntool " << r.audit.tool_version << ", model " << r.audit.model_digest << ", catalog "
      << r.audit.catalog_digest << "\n";
  return out.str();
}

std::string render_machine(const CompletenessReport& r) {
  nlohmann::ordered_json j;
  j["dpa_id"] = r.dpa_id;
  j["complete"] = r.complete;
  j["satisfied_count"] = r.satisfied_count;
  j["violation_count"] = r.violation_count;
  j["provisions"] = nlohmann::ordered_json::array();
  for (const auto& v : r.provisions) {
    nlohmann::ordered_json pj;
    pj["id"] = v.id.str();
    pj["title"] = v.title;
    pj["status"] = v.status == Status::kSatisfied ? "satisfied" : "violated";
    pj["supporting"] = nlohmann::ordered_json::array();
    for (const auto& s : v.supporting) {
      pj["supporting"].push_back(
          {{"sentence_index", s.sentence_index}, {"score", s.score}, {"text", s.text}});
    }
    j["provisions"].push_back(std::move(pj));
  }
  j["audit"] = {{"tool_version", r.audit.tool_version},
                {"model_digest", r.audit.model_digest},
                {"catalog_digest", r.audit.catalog_digest}};
  return j.dump(2) + "\n";
}

}  // namespace

std::string render_report(const CompletenessReport& report, ReportFormat format) {
  return format == ReportFormat::kHuman ? render_human(report) : render_machine(report);
}

CompletenessReport parse_report(std::string_view machine_text) {
  try {
    const auto j = nlohmann::json::parse(machine_text);
    CompletenessReport r;
    r.dpa_id = j.at("dpa_id").get<std::string>();
    r.complete = j.at("complete").get<bool>();
    r.satisfied_count = j.at("satisfied_count").get<std::size_t>();
    r.violation_count = j.at("violation_count").get<std::size_t>();
    for (const auto& pj : j.at("provisions")) {
      ProvisionVerdict v;
      v.id = ProvisionId(pj.at("id").get<std::string>());
      v.title = pj.at("title").get<std::string>();
      const auto status = pj.at("status").get<std::string>();
      if (status != "satisfied" && status != "violated") {
        throw ParseError("<report>", 0, "unknown status " + status);
      }
      v.status = status == "satisfied" ? Status::kSatisfied : Status::kViolated;
      for (const auto& sj : pj.at("supporting")) {
        v.supporting.push_back({sj.at("sentence_index").get<std::size_t>(),
                                sj.at("text").get<std::string>(), sj.at("score").get<double>()});
      }
      r.provisions.push_back(std::move(v));
    }
    const auto& a = j.at("audit");
    r.audit = {a.at("tool_version").get<std::string>(), a.at("model_digest").get<std::string>(),
               a.at("catalog_digest").get<std::string>()};
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("<report>", 0, e.what());
  }
}

}  // namespace dpacheck::checker
