#include "dpacheck/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::corpus {

using nlohmann::json;

ProvisionId::ProvisionId(std::string value) : value_(std::move(value)) {
  if (!is_valid(value_)) {
    throw ValidationError("invalid provision id '" + value_ + "'");
  }
}

bool ProvisionId::is_valid(std::string_view value) {
  std::size_t i = 0;
  while (i < value.size() && std::isalpha(static_cast<unsigned char>(value[i]))) ++i;
  if (i == 0 || i == value.size()) return false;
  for (; i < value.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(value[i]))) return false;
  }
  return true;
}

ProvisionCatalog::ProvisionCatalog(std::string regulation_name,
                                   std::vector<Provision> provisions)
    : regulation_name_(std::move(regulation_name)),
      provisions_(std::move(provisions)) {
  if (provisions_.empty()) throw ValidationError("catalog has no provisions");
  std::set<std::string> seen;
  for (const auto& p : provisions_) {
    if (p.id.str().empty()) throw ValidationError("catalog entry without id");
    if (!seen.insert(p.id.str()).second) {
      throw ValidationError("duplicate provision id " + p.id.str());
    }
  }
}

std::optional<std::size_t> ProvisionCatalog::index_of(const ProvisionId& id) const {
  return index_of(std::string_view(id.str()));
}

std::optional<std::size_t> ProvisionCatalog::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < provisions_.size(); ++i) {
    if (provisions_[i].id.str() == id) return i;
  }
  return std::nullopt;
}

std::size_t ProvisionCatalog::require(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw ValidationError("unknown provision " + std::string(id));
  return *idx;
}

std::string ProvisionCatalog::digest() const {
  return hash_hex(fnv1a64(catalog_to_json(*this)));
}

ProvisionCatalog parse_catalog(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  try {
    std::vector<Provision> provisions;
    for (const auto& entry : doc.at("provisions")) {
      provisions.push_back({ProvisionId(entry.at("id").get<std::string>()),
                            entry.value("title", std::string()),
                            entry.value("description", std::string())});
    }
    return ProvisionCatalog(doc.value("regulation_name", std::string()),
                            std::move(provisions));
  } catch (const json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

ProvisionCatalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open catalog " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str(), path);
}

std::string catalog_to_json(const ProvisionCatalog& catalog) {
  json doc;
  doc["regulation_name"] = catalog.regulation_name();
  doc["provisions"] = json::array();
  for (const auto& p : catalog.provisions()) {
    doc["provisions"].push_back(
        {{"id", p.id.str()}, {"title", p.title}, {"description", p.description}});
  }
  return doc.dump(2) + "\n";
}

bool Sentence::satisfies(const ProvisionId& id) const {
  return std::find(gold_labels.begin(), gold_labels.end(), id) != gold_labels.end();
}

std::size_t LabeledCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : dpas) n += d.sentences.size();
  return n;
}

std::size_t LabeledCorpus::positive_count() const {
  std::size_t n = 0;
  for (const auto& d : dpas) {
    for (const auto& s : d.sentences) n += s.satisfies_any() ? 1 : 0;
  }
  return n;
}

const Dpa* LabeledCorpus::find(std::string_view dpa_id) const {
  for (const auto& d : dpas) {
    if (d.dpa_id == dpa_id) return &d;
  }
  return nullptr;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void LabeledCorpus::validate() const {
  std::set<std::string> ids;
  for (const auto& d : dpas) {
    if (d.dpa_id.empty()) throw ValidationError("empty dpa_id");
    if (!ids.insert(d.dpa_id).second) {
      throw ValidationError("duplicate dpa_id " + d.dpa_id);
    }
    std::set<std::size_t> indices;
    for (const auto& s : d.sentences) {
      if (s.dpa_id != d.dpa_id) {
        throw ValidationError("sentence filed under the wrong DPA " + d.dpa_id);
      }
      if (!indices.insert(s.sentence_index).second) {
        throw ValidationError("duplicate sentence (" + d.dpa_id + ", " +
                              std::to_string(s.sentence_index) + ")");
      }
      if (blank(s.text)) {
        throw ValidationError("empty sentence text (" + d.dpa_id + ", " +
                              std::to_string(s.sentence_index) + ")");
      }
      for (const auto& label : s.gold_labels) catalog.require(label.str());
    }
  }
}

LabeledCorpus parse_ground_truth(std::istream& in, const ProvisionCatalog& catalog,
                                 const std::string& source) {
  LabeledCorpus corpus;
  corpus.catalog = catalog;
  ReportedShape claim;
  std::map<std::string, std::size_t> dpa_slot;
  std::set<std::pair<std::string, std::size_t>> seen;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(source, line_no, "record is not an object");

    if (rec.contains("meta")) {
      const auto& meta = rec["meta"];
      corpus.provenance = meta.value("provenance", std::string());
      if (meta.contains("dpas")) claim.dpas = meta["dpas"].get<std::size_t>();
      if (meta.contains("sentences")) claim.sentences = meta["sentences"].get<std::size_t>();
      if (meta.contains("positives")) claim.positives = meta["positives"].get<std::size_t>();
      continue;
    }

    Sentence s;
    try {
      s.dpa_id = rec.at("dpa_id").get<std::string>();
      s.sentence_index = rec.at("sentence_index").get<std::size_t>();
      s.text = rec.at("text").get<std::string>();
      std::vector<std::size_t> label_idx;
      for (const auto& l : rec.value("labels", json::array())) {
        const auto id = l.get<std::string>();
        auto idx = catalog.index_of(id);
        if (!idx) {
          throw ValidationError(source + ":" + std::to_string(line_no) +
                                ": unknown provision " + id);
        }
        label_idx.push_back(*idx);
      }
      std::sort(label_idx.begin(), label_idx.end());
      label_idx.erase(std::unique(label_idx.begin(), label_idx.end()), label_idx.end());
      for (auto i : label_idx) s.gold_labels.push_back(catalog.at(i).id);
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
    }
    if (s.dpa_id.empty()) throw ParseError(source, line_no, "empty dpa_id");
    if (blank(s.text)) throw ParseError(source, line_no, "empty sentence text");
    if (!seen.emplace(s.dpa_id, s.sentence_index).second) {
      throw ParseError(source, line_no,
                       "duplicate sentence (" + s.dpa_id + ", " +
                           std::to_string(s.sentence_index) + ")");
    }
    auto [it, inserted] = dpa_slot.emplace(s.dpa_id, corpus.dpas.size());
    if (inserted) corpus.dpas.push_back({s.dpa_id, {}});
    corpus.dpas[it->second].sentences.push_back(std::move(s));
  }

  for (auto& d : corpus.dpas) {
    std::sort(d.sentences.begin(), d.sentences.end(),
              [](const Sentence& a, const Sentence& b) {
                return a.sentence_index < b.sentence_index;
              });
  }
  corpus.validate();
  check_reported_shape(corpus, claim);
  return corpus;
}

LabeledCorpus load_ground_truth(const std::string& path,
                                const ProvisionCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open ground truth " + path);
  return parse_ground_truth(in, catalog, path);
}

LabeledCorpus load_ground_truth(const std::string& path,
                                const std::string& catalog_path) {
  return load_ground_truth(path, load_catalog(catalog_path));
}

void write_ground_truth(const LabeledCorpus& corpus, std::ostream& out) {
  if (!corpus.provenance.empty()) {
    json meta = {{"provenance", corpus.provenance},
                 {"dpas", corpus.dpas.size()},
                 {"sentences", corpus.sentence_count()},
                 {"positives", corpus.positive_count()}};
    out << json{{"meta", meta}}.dump() << '\n';
  }
  for (const auto& d : corpus.dpas) {
    for (const auto& s : d.sentences) {
      json labels = json::array();
      for (const auto& l : s.gold_labels) labels.push_back(l.str());
      json rec = {{"dpa_id", s.dpa_id},
                  {"sentence_index", s.sentence_index},
                  {"text", s.text},
                  {"labels", labels}};
      out << rec.dump() << '\n';
    }
  }
}

void save_ground_truth(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_ground_truth(corpus, out);
}

void check_reported_shape(const LabeledCorpus& corpus, const ReportedShape& claim) {
  auto check = [](const char* what, std::optional<std::size_t> claimed,
                  std::size_t actual) {
    if (claimed && *claimed != actual) {
      throw ValidationError(std::string("corpus claims ") + std::to_string(*claimed) +
                            " " + what + " but contains " + std::to_string(actual));
    }
  };
  check("DPAs", claim.dpas, corpus.dpas.size());
  check("sentences", claim.sentences, corpus.sentence_count());
  check("positive sentences", claim.positives, corpus.positive_count());
}

namespace {

LabeledCorpus subset(const LabeledCorpus& corpus, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  LabeledCorpus part;
  part.catalog = corpus.catalog;
  part.provenance = corpus.provenance;
  for (const auto& id : ids) part.dpas.push_back(*corpus.find(id));
  return part;
}

bool open_unit(double f) { return f > 0.0 && f < 1.0; }

}  // namespace

CorpusSplit split_dpas(const LabeledCorpus& corpus, const SplitSpec& spec) {
  if (!open_unit(spec.dev_fraction) || !open_unit(spec.val_fraction_of_dev)) {
    throw ValidationError("split fractions must lie strictly inside (0, 1)");
  }
  const std::size_t n = corpus.dpas.size();
  if (n < 2) throw ValidationError("split needs at least 2 DPAs, corpus has " + std::to_string(n));

  std::vector<std::string> ids;
  for (const auto& d : corpus.dpas) ids.push_back(d.dpa_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::string>(ids));

  const auto n_dev = static_cast<std::size_t>(std::llround(spec.dev_fraction * n));
  if (n_dev == 0 || n_dev >= n) {
    throw ValidationError("dev fraction " + std::to_string(spec.dev_fraction) +
                          " leaves an empty part for " + std::to_string(n) + " DPAs");
  }
  const auto n_val =
      static_cast<std::size_t>(std::llround(spec.val_fraction_of_dev * n_dev));
  if (n_val >= n_dev) {
    throw ValidationError("validation fraction leaves no training DPAs");
  }

  const auto begin = ids.begin();
  std::vector<std::string> dev(begin, begin + n_dev);
  std::vector<std::string> eval(begin + n_dev, ids.end());
  std::vector<std::string> train(begin, begin + (n_dev - n_val));
  std::vector<std::string> val(begin + (n_dev - n_val), begin + n_dev);
  return {subset(corpus, dev), subset(corpus, eval), subset(corpus, train),
          subset(corpus, val)};
}

std::size_t StatsTable::count(std::string_view id) const {
  for (const auto& [pid, c] : per_provision) {
    if (pid.str() == id) return c;
  }
  return 0;
}

StatsTable corpus_stats(const LabeledCorpus& corpus) {
  StatsTable t;
  t.total_dpas = corpus.dpas.size();
  std::vector<std::size_t> counts(corpus.catalog.size(), 0);
  for (const auto& d : corpus.dpas) {
    for (const auto& s : d.sentences) {
      ++t.total_sentences;
      if (s.satisfies_any()) ++t.positive_sentences;
      if (s.gold_labels.size() > 1) ++t.multi_labeled_sentences;
      for (const auto& l : s.gold_labels) ++counts[corpus.catalog.require(l.str())];
    }
  }
  t.positive_fraction = t.total_sentences == 0
                            ? 0.0
                            : static_cast<double>(t.positive_sentences) /
                                  static_cast<double>(t.total_sentences);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    t.per_provision.emplace_back(corpus.catalog.at(i).id, counts[i]);
  }
  return t;
}

std::string render_stats_tsv(const StatsTable& stats) {
  std::ostringstream out;
  out << "key\tvalue\n";
  out << "dpas\t" << stats.total_dpas << '\n';
  out << "sentences\t" << stats.total_sentences << '\n';
  out << "positive_sentences\t" << stats.positive_sentences << '\n';
  out << "multi_labeled_sentences\t" << stats.multi_labeled_sentences << '\n';
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.6f", stats.positive_fraction);
  out << "positive_fraction\t" << frac << '\n';
  for (const auto& [id, c] : stats.per_provision) out << id.str() << '\t' << c << '\n';
  return out.str();
}

}  // namespace dpacheck::corpus
