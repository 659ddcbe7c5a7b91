#include "dpacheck/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <sys/utsname.h>

#include <json.hpp>

#include "dpacheck/errors.hpp"

namespace dpacheck::eval {

Counts& Counts::operator+=(const Counts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

const Counts& ProvisionConfusion::at(std::string_view provision) const {
  for (const auto& [id, c] : per_provision) {
    if (id == provision) return c;
  }
  throw ValidationError("unknown provision " + std::string(provision));
}

ProvisionConfusion dpa_confusion(const SatisfiedSets& gold, const SatisfiedSets& predicted,
                                 const corpus::ProvisionCatalog& catalog) {
  if (gold.size() != predicted.size() ||
      !std::equal(gold.begin(), gold.end(), predicted.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw ValidationError("gold and predicted DPA id sets differ");
  }
  ProvisionConfusion conf;
  conf.dpas = gold.size();
  for (const auto& p : catalog.provisions()) {
    Counts c;
    const auto& id = p.id.str();
    for (const auto& [dpa, g] : gold) {
      const bool in_gold = g.count(id) > 0;
      const bool in_pred = predicted.at(dpa).count(id) > 0;
      if (in_gold && in_pred) ++c.tp;
      else if (in_pred) ++c.fp;
      else if (in_gold) ++c.fn;
      else ++c.tn;
    }
    conf.per_provision.emplace_back(id, c);
  }
  return conf;
}

SatisfiedSets satisfied_sets(const corpus::LabeledCorpus& corpus) {
  SatisfiedSets out;
  for (const auto& d : corpus.dpas) {
    auto& set = out[d.dpa_id];
    for (const auto& s : d.sentences) {
      for (const auto& l : s.gold_labels) set.insert(l.str());
    }
  }
  return out;
}

double f_beta(double precision, double recall, double beta) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

MetricRow metrics_from_counts(std::string label, const Counts& c, double beta) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  MetricRow row;
  row.label = std::move(label);
  row.counts = c;
  const auto ratio = [](std::uint64_t num, std::uint64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  bool unused = false;
  row.accuracy = ratio(c.tp + c.tn, c.total(), unused);
  row.precision = ratio(c.tp, c.tp + c.fp, row.precision_undefined);
  row.recall = ratio(c.tp, c.tp + c.fn, row.recall_undefined);
  // Count form of F-beta; equal to the P/R form whenever both are defined.
  const double b2 = beta * beta;
  const double den = (1.0 + b2) * static_cast<double>(c.tp) + b2 * static_cast<double>(c.fn) +
                     static_cast<double>(c.fp);
  row.f_undefined = den == 0.0;
  row.f_beta = row.f_undefined ? 0.0 : (1.0 + b2) * static_cast<double>(c.tp) / den;
  return row;
}

MetricsSummary compute_metrics(const ProvisionConfusion& confusion, double beta) {
  MetricsSummary s;
  s.beta = beta;
  Counts pooled;
  double acc = 0.0, prec = 0.0, rec = 0.0, f = 0.0;
  std::size_t n_prec = 0, n_rec = 0, n_f = 0;
  for (const auto& [id, c] : confusion.per_provision) {
    auto row = metrics_from_counts(id, c, beta);
    pooled += c;
    acc += row.accuracy;
    if (!row.precision_undefined) {
      prec += row.precision;
      ++n_prec;
    }
    if (!row.recall_undefined) {
      rec += row.recall;
      ++n_rec;
    }
    if (!row.f_undefined) {
      f += row.f_beta;
      ++n_f;
    }
    s.per_provision.push_back(std::move(row));
  }
  const std::size_t n = confusion.per_provision.size();
  s.micro = metrics_from_counts("micro", pooled, beta);
  s.macro.label = "macro";
  s.macro.counts = pooled;
  s.macro.accuracy = n ? acc / static_cast<double>(n) : 0.0;
  s.macro.precision = n_prec ? prec / static_cast<double>(n_prec) : 0.0;
  s.macro.recall = n_rec ? rec / static_cast<double>(n_rec) : 0.0;
  s.macro.f_beta = n_f ? f / static_cast<double>(n_f) : 0.0;
  s.macro.precision_undefined = n_prec == 0;
  s.macro.recall_undefined = n_rec == 0;
  s.macro.f_undefined = n_f == 0;
  s.macro_precision_skipped = n - n_prec;
  s.macro_recall_skipped = n - n_rec;
  s.macro_f_skipped = n - n_f;
  return s;
}

std::vector<Counts> class_counts(std::span<const std::size_t> gold,
                                 std::span<const std::size_t> predicted, std::size_t num_classes) {
  if (gold.size() != predicted.size()) throw ValidationError("gold/predicted length mismatch");
  std::vector<Counts> out(num_classes);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t k = 0; k < num_classes; ++k) {
      const bool g = gold[i] == k, p = predicted[i] == k;
      if (g && p) ++out[k].tp;
      else if (p) ++out[k].fp;
      else if (g) ++out[k].fn;
      else ++out[k].tn;
    }
  }
  return out;
}

namespace {

std::string fmt(double v, bool undefined) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%s", v, undefined ? "*" : "");
  return buf;
}

void row_tsv(std::ostringstream& out, const MetricRow& r) {
  out << r.label << '\t' << r.counts.tp << '\t' << r.counts.fp << '\t' << r.counts.fn << '\t'
      << r.counts.tn << '\t' << fmt(r.accuracy, false) << '\t'
      << fmt(r.precision, r.precision_undefined) << '\t' << fmt(r.recall, r.recall_undefined)
      << '\t' << fmt(r.f_beta, r.f_undefined) << '\n';
}

nlohmann::ordered_json row_json(const MetricRow& r) {
  return {{"label", r.label},
          {"tp", r.counts.tp},
          {"fp", r.counts.fp},
          {"fn", r.counts.fn},
          {"tn", r.counts.tn},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f_beta", r.f_beta},
          {"precision_undefined", r.precision_undefined},
          {"recall_undefined", r.recall_undefined},
          {"f_undefined", r.f_undefined}};
}

}  // namespace

std::string render_metrics_tsv(const MetricsSummary& s) {
  std::ostringstream out;
  char header[64];
  std::snprintf(header, sizeof header, "F%g", s.beta);
  out << "provision\tTP\tFP\tFN\tTN\tA\tP\tR\t" << header << '\n';
  for (const auto& r : s.per_provision) row_tsv(out, r);
  row_tsv(out, s.micro);
  out << "macro\t-\t-\t-\t-\t" << fmt(s.macro.accuracy, false) << '\t'
      << fmt(s.macro.precision, s.macro.precision_undefined) << '\t'
      << fmt(s.macro.recall, s.macro.recall_undefined) << '\t'
      << fmt(s.macro.f_beta, s.macro.f_undefined) << '\n';
  out << "# * undefined (empty denominator), reported as 0; macro averages skip "
      << s.macro_precision_skipped << " P / " << s.macro_recall_skipped << " R / "
      << s.macro_f_skipped << " F cells\n";
  return out.str();
}

std::string render_metrics_json(const MetricsSummary& s) {
  nlohmann::ordered_json j;
  j["beta"] = s.beta;
  j["per_provision"] = nlohmann::ordered_json::array();
  for (const auto& r : s.per_provision) j["per_provision"].push_back(row_json(r));
  j["micro"] = row_json(s.micro);
  j["macro"] = row_json(s.macro);
  j["macro_skipped"] = {{"precision", s.macro_precision_skipped},
                        {"recall", s.macro_recall_skipped},
                        {"f_beta", s.macro_f_skipped}};
  return j.dump(2) + "\n";
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw ValidationError("kappa: label sequences have lengths " + std::to_string(a.size()) +
                          " and " + std::to_string(b.size()));
  }
  if (a.empty()) throw ValidationError("kappa: empty label sequences");
  const double n = static_cast<double>(a.size());
  std::map<std::string, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) agree += 1.0;
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, m] : marginals) p_e += (m.first / n) * (m.second / n);
  if (p_e >= 1.0) {
    if (p_o == 1.0) return 1.0;
    throw ValidationError("kappa undefined: chance agreement is 1");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

std::string kappa_band(double kappa) {
  // Bands are inclusive of their upper bound at two-decimal resolution.
  if (kappa <= 0.0) return "no agreement";
  if (kappa <= 0.20) return "slight agreement";
  if (kappa <= 0.40) return "fair agreement";
  if (kappa <= 0.60) return "moderate agreement";
  if (kappa <= 0.80) return "substantial agreement";
  return "almost perfect agreement";
}

double BenchmarkTable::perspective_seconds(std::string_view perspective) const {
  double s = 0.0;
  for (const auto& st : stages) {
    if (st.perspective == perspective) s += st.seconds;
  }
  return s;
}

BenchmarkTable benchmark_runtime(const std::vector<Stage>& stages) {
  BenchmarkTable table;
  table.machine = machine_descriptor();
  for (const auto& stage : stages) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t items = stage.run ? stage.run() : 0;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    table.stages.push_back({stage.name, stage.perspective, elapsed.count(), items});
    table.total_seconds += elapsed.count();
  }
  return table;
}

std::string machine_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.rfind("model name", 0) == 0) {
      if (auto p = line.find(':'); p != std::string::npos) cpu = line.substr(p + 2);
      break;
    }
  }
  std::string os = "unknown os";
  utsname u{};
  if (uname(&u) == 0) os = std::string(u.sysname) + " " + u.release + " " + u.machine;
  return cpu + "; " + std::to_string(std::thread::hardware_concurrency()) + " threads; " + os;
}

std::string render_benchmark_tsv(const BenchmarkTable& table) {
  std::ostringstream out;
  out << "# machine: " << table.machine << '\n';
  out << "stage\tperspective\titems\tseconds\n";
  char buf[32];
  for (const auto& s : table.stages) {
    std::snprintf(buf, sizeof buf, "%.6f", s.seconds);
    out << s.name << '\t' << s.perspective << '\t' << s.items << '\t' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", table.total_seconds);
  out << "total\t-\t-\t" << buf << '\n';
  return out.str();
}

}  // namespace dpacheck::eval
