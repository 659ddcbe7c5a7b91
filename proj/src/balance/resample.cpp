#include <algorithm>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "dpacheck/balance.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::balance {

using classifiers::TaskSpec;
using nlohmann::json;

std::string_view method_name(AugmentMethod method) {
  switch (method) {
    case AugmentMethod::kBackTranslation: return "BT";
    case AugmentMethod::kSynonym: return "SR";
    case AugmentMethod::kEmbedding: return "ER";
    case AugmentMethod::kNoiseSwap: return "NI-swap";
    case AugmentMethod::kNoiseDelete: return "NI-delete";
    case AugmentMethod::kNoiseSubstitute: return "NI-substitute";
    case AugmentMethod::kNoiseCrop: return "NI-crop";
  }
  return "?";
}

AugmentMethod parse_method(std::string_view name) {
  for (auto m : {AugmentMethod::kBackTranslation, AugmentMethod::kSynonym,
                 AugmentMethod::kEmbedding, AugmentMethod::kNoiseSwap,
                 AugmentMethod::kNoiseDelete, AugmentMethod::kNoiseSubstitute,
                 AugmentMethod::kNoiseCrop}) {
    if (method_name(m) == name) return m;
  }
  throw ValidationError("unknown augmentation method '" + std::string(name) + "'");
}

Dataset from_corpus(const corpus::LabeledCorpus& corpus) {
  Dataset out;
  for (const auto& d : corpus.dpas) {
    for (const auto& s : d.sentences) out.push_back({s, Origin::kOriginal, {}, {}, false});
  }
  return out;
}

std::vector<std::size_t> class_counts(const Dataset& data, const TaskSpec& task) {
  std::vector<std::size_t> counts(task.num_classes(), 0);
  for (const auto& e : data) ++counts[task.class_of(e.sentence.gold_labels)];
  return counts;
}

namespace {

std::string_view origin_name(Origin o) {
  switch (o) {
    case Origin::kOriginal: return "original";
    case Origin::kDuplicate: return "duplicate";
    case Origin::kAugmented: return "augmented";
  }
  return "?";
}

Origin parse_origin(std::string_view s) {
  if (s == "original") return Origin::kOriginal;
  if (s == "duplicate") return Origin::kDuplicate;
  if (s == "augmented") return Origin::kAugmented;
  throw ValidationError("unknown origin '" + std::string(s) + "'");
}

}  // namespace

void write_dataset(const Dataset& data, std::ostream& out) {
  for (const auto& e : data) {
    json labels = json::array();
    for (const auto& l : e.sentence.gold_labels) labels.push_back(l.str());
    nlohmann::ordered_json rec;
    rec["dpa_id"] = e.sentence.dpa_id;
    rec["sentence_index"] = e.sentence.sentence_index;
    rec["text"] = e.sentence.text;
    rec["labels"] = labels;
    rec["origin"] = origin_name(e.origin);
    if (e.method) rec["method"] = method_name(*e.method);
    if (!e.params.empty()) rec["params"] = e.params;
    if (e.identity) rec["identity"] = true;
    out << rec.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in, const corpus::ProvisionCatalog& catalog,
                     const std::string& source) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = json::parse(line);
      if (rec.contains("meta")) continue;
      Example e;
      e.sentence.dpa_id = rec.at("dpa_id").get<std::string>();
      e.sentence.sentence_index = rec.at("sentence_index").get<std::size_t>();
      e.sentence.text = rec.at("text").get<std::string>();
      std::vector<std::size_t> idx;
      for (const auto& l : rec.value("labels", json::array())) {
        idx.push_back(catalog.require(l.get<std::string>()));
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (auto i : idx) e.sentence.gold_labels.push_back(catalog.at(i).id);
      e.origin = parse_origin(rec.value("origin", std::string("original")));
      if (rec.contains("method")) e.method = parse_method(rec["method"].get<std::string>());
      e.params = rec.value("params", std::string());
      e.identity = rec.value("identity", false);
      if (e.sentence.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ParseError(source, line_no, "empty sentence text");
      }
      data.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(source, line_no, std::string("malformed record: ") + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return data;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const Dataset& data, const TaskSpec& task) {
  std::vector<std::vector<std::size_t>> members(task.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    members[task.class_of(data[i].sentence.gold_labels)].push_back(i);
  }
  return members;
}

}  // namespace

Dataset random_undersample(const Dataset& data, const TaskSpec& task, std::uint64_t seed,
                           std::optional<std::size_t> target) {
  const auto members = members_by_class(data, task);
  const std::size_t majority = task.other_index();
  std::size_t minority_max = 0;
  for (std::size_t c = 0; c < majority; ++c) minority_max = std::max(minority_max, members[c].size());
  if (minority_max == 0) {
    throw ValidationError(task.is_binary()
                              ? "undersampling needs at least one positive example"
                              : "undersampling needs at least one provision-class example");
  }
  const std::size_t goal = target.value_or(minority_max);
  if (members[majority].size() <= goal) return data;

  Rng rng(derive_seed(seed, 0, "undersample"));
  std::vector<bool> keep(data.size(), true);
  for (auto i : members[majority]) keep[i] = false;
  for (auto pick : rng.sample_without_replacement(members[majority].size(), goal)) {
    keep[members[majority][pick]] = true;
  }
  Dataset out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) out.push_back(data[i]);
  }
  return out;
}

Dataset random_oversample(const Dataset& data, const TaskSpec& task, std::uint64_t seed,
                          std::optional<std::size_t> target) {
  const auto members = members_by_class(data, task);
  if (task.is_binary() && members[0].empty()) {
    throw ValidationError("oversampling needs at least one positive example");
  }
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());
  const std::size_t goal = target.value_or(majority);

  Dataset out = data;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const auto& m = members[c];
    if (m.empty() || m.size() >= goal) continue;
    Rng rng(derive_seed(seed, c, "oversample"));
    for (std::size_t k = m.size(); k < goal; ++k) {
      Example dup = data[m[rng.index(m.size())]];
      dup.origin = Origin::kDuplicate;
      out.push_back(std::move(dup));
    }
  }
  return out;
}

Dataset under_oversample(const Dataset& data, const TaskSpec& task, std::uint64_t seed) {
  if (task.is_binary()) throw ValidationError("under-oversampling applies to multiclass tasks");
  const auto members = members_by_class(data, task);
  std::size_t target = 0;
  for (std::size_t c = 0; c < task.other_index(); ++c) target = std::max(target, members[c].size());
  auto reduced = random_undersample(data, task, derive_seed(seed, 1, "ruos"), target);
  return random_oversample(reduced, task, derive_seed(seed, 2, "ruos"), target);
}

}  // namespace dpacheck::balance
