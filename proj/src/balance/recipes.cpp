#include <algorithm>
#include <array>
#include <sstream>

#include <json.hpp>

#include "dpacheck/balance.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::balance {

std::string_view family_name(AugmentFamily family) {
  switch (family) {
    case AugmentFamily::kBackTranslation: return "BT";
    case AugmentFamily::kSynonym: return "SR";
    case AugmentFamily::kEmbedding: return "ER";
    case AugmentFamily::kNoise: return "NI";
  }
  return "?";
}

std::string RecipeStep::describe() const {
  std::string out;
  switch (kind) {
    case Kind::kUndersample: out = "undersample"; break;
    case Kind::kOversample: out = "oversample"; break;
    case Kind::kAugment: out = "augment " + std::string(family_name(family)) + " x" + std::to_string(multiplicity); break;
  }
  if (target) out += " to " + std::to_string(*target);
  return out;
}

void VariantRecipe::validate() const {
  if (name.empty()) throw ValidationError("recipe needs a name");
  if (steps.empty()) throw ValidationError("recipe " + name + " has no steps");
  const auto count = [&](RecipeStep::Kind k) {
    return std::count_if(steps.begin(), steps.end(), [k](const auto& s) { return s.kind == k; });
  };
  if (count(RecipeStep::Kind::kUndersample) > 1 || count(RecipeStep::Kind::kOversample) > 1) {
    throw ValidationError("recipe " + name + " repeats a resampling step");
  }
  for (const auto& s : steps) {
    if (s.kind == RecipeStep::Kind::kAugment && s.multiplicity == 0) {
      throw ValidationError("recipe " + name + ": augmentation multiplicity must be positive");
    }
  }
}

namespace {

RecipeStep under() { return {RecipeStep::Kind::kUndersample, std::nullopt, {}, 1}; }
RecipeStep over() { return {RecipeStep::Kind::kOversample, std::nullopt, {}, 1}; }

RecipeStep augment(AugmentFamily f) {
  // Two pivots, two lexicons, three embedding variants, all four noise ops.
  const std::size_t k = f == AugmentFamily::kNoise ? 4 : f == AugmentFamily::kEmbedding ? 3 : 2;
  return {RecipeStep::Kind::kAugment, std::nullopt, f, k};
}

constexpr std::array<AugmentFamily, 4> kFamilies = {
    AugmentFamily::kBackTranslation, AugmentFamily::kSynonym, AugmentFamily::kEmbedding,
    AugmentFamily::kNoise};

}  // namespace

std::vector<VariantRecipe> builtin_recipes() {
  std::vector<VariantRecipe> out;
  out.push_back({"RU", {under()}});
  out.push_back({"RO", {over()}});
  out.push_back({"RUOS", {under(), over()}});
  for (auto f : kFamilies) out.push_back({std::string(family_name(f)), {augment(f)}});
  for (auto f : kFamilies) {
    out.push_back({std::string(family_name(f)) + "+RUOS", {augment(f), under(), over()}});
  }
  VariantRecipe all{"ALL", {}};
  for (auto f : kFamilies) all.steps.push_back(augment(f));
  out.push_back(all);
  all.name = "ALL+RUOS";
  all.steps.push_back(under());
  all.steps.push_back(over());
  out.push_back(all);
  return out;
}

VariantRecipe find_recipe(std::string_view name) {
  for (auto& r : builtin_recipes()) {
    if (r.name == name) return r;
  }
  std::string known;
  for (const auto& r : builtin_recipes()) known += (known.empty() ? "" : ", ") + r.name;
  throw ValidationError("unknown recipe '" + std::string(name) + "' (known: " + known + ")");
}

void append_augmented(Dataset& data, const std::vector<AugmentedSentence>& variants) {
  for (const auto& v : variants) {
    Example e;
    e.sentence = v.base;
    e.sentence.text = v.text;
    e.origin = Origin::kAugmented;
    e.method = v.method;
    e.params = v.params;
    e.identity = v.identity;
    data.push_back(std::move(e));
  }
}

std::string VariantManifest::to_json() const {
  nlohmann::ordered_json j;
  j["recipe"] = recipe;
  j["seed"] = seed;
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"step", s.step},
                          {"size_after", s.size_after},
                          {"dropped", s.dropped},
                          {"failures", s.failures}});
  }
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [cls, n] : class_counts) counts[cls] = n;
  j["class_counts"] = counts;
  j["total"] = total;
  j["dataset_digest"] = dataset_digest;
  return j.dump(2);
}

namespace {

bool is_positive(const Example& e, const classifiers::TaskSpec& task) {
  return task.class_of(e.sentence.gold_labels) != task.other_index();
}

}  // namespace

VariantResult build_variant(const Dataset& train, const classifiers::TaskSpec& task,
                            const VariantRecipe& recipe, std::uint64_t seed,
                            const Resources& resources) {
  recipe.validate();
  VariantResult result;
  result.dataset = train;
  auto& manifest = result.manifest;
  manifest.recipe = recipe.name;
  manifest.seed = seed;

  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    const auto& step = recipe.steps[i];
    const auto step_seed = derive_seed(seed, i, "step");
    StepRecord record{step.describe(), 0, 0, 0};
    const auto fail = [&](const std::string& what) {
      throw ValidationError("recipe " + recipe.name + ", step " + std::to_string(i + 1) + " (" +
                            record.step + "): " + what);
    };
    switch (step.kind) {
      case RecipeStep::Kind::kUndersample:
        result.dataset = random_undersample(result.dataset, task, step_seed, step.target);
        break;
      case RecipeStep::Kind::kOversample:
        result.dataset = random_oversample(result.dataset, task, step_seed, step.target);
        break;
      case RecipeStep::Kind::kAugment: {
        std::vector<corpus::Sentence> positives;
        for (const auto& e : result.dataset) {
          if (e.origin == Origin::kOriginal && is_positive(e, task)) positives.push_back(e.sentence);
        }
        AugmentResult aug;
        const auto k = step.multiplicity;
        switch (step.family) {
          case AugmentFamily::kBackTranslation: {
            if (!resources.mt) fail("no translation client configured");
            if (resources.pivots.size() < k) fail("needs " + std::to_string(k) + " pivot languages");
            std::vector<std::string> pivots(resources.pivots.begin(), resources.pivots.begin() + k);
            aug = augment_backtranslate(positives, *resources.mt, pivots);
            break;
          }
          case AugmentFamily::kSynonym: {
            if (resources.lexicons.size() < k) fail("needs " + std::to_string(k) + " synonym lexicons");
            std::vector<SynonymLexicon> lex(resources.lexicons.begin(), resources.lexicons.begin() + k);
            aug = augment_synonym(positives, lex, step_seed);
            break;
          }
          case AugmentFamily::kEmbedding:
            if (!resources.store || !resources.store->has_vocabulary()) {
              fail("needs an embedding store with a vocabulary section");
            }
            aug = augment_embedding(positives, *resources.store, k, step_seed);
            break;
          case AugmentFamily::kNoise: {
            constexpr std::array<NoiseOp, 4> ops = {NoiseOp::kSwap, NoiseOp::kDelete,
                                                    NoiseOp::kSubstitute, NoiseOp::kCrop};
            if (k > ops.size()) fail("at most 4 noise operations exist");
            std::vector<corpus::Sentence> all;
            for (const auto& e : train) all.push_back(e.sentence);
            aug = augment_noise(positives, std::span(ops.data(), k), content_vocabulary(all),
                                step_seed, resources.noise);
            break;
          }
        }
        record.dropped = aug.dropped;
        record.failures = aug.failures;
        append_augmented(result.dataset, aug.variants);
        break;
      }
    }
    record.size_after = result.dataset.size();
    manifest.steps.push_back(std::move(record));
  }

  const auto counts = class_counts(result.dataset, task);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    manifest.class_counts.emplace_back(task.classes[c], counts[c]);
  }
  manifest.total = result.dataset.size();
  std::ostringstream out;
  write_dataset(result.dataset, out);
  manifest.dataset_digest = hash_hex(fnv1a64(out.str()));
  return result;
}

}  // namespace dpacheck::balance
