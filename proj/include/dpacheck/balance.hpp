#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/corpus.hpp"
#include "dpacheck/embedding.hpp"

namespace dpacheck::balance {

enum class Origin { kOriginal, kDuplicate, kAugmented };

enum class AugmentMethod {
  kBackTranslation,
  kSynonym,
  kEmbedding,
  kNoiseSwap,
  kNoiseDelete,
  kNoiseSubstitute,
  kNoiseCrop,
};

std::string_view method_name(AugmentMethod method);
AugmentMethod parse_method(std::string_view name);

// A training example. Duplicates and augmented examples keep the gold labels
// of the sentence they came from.
struct Example {
  corpus::Sentence sentence;
  Origin origin = Origin::kOriginal;
  std::optional<AugmentMethod> method;
  std::string params;
  bool identity = false;

  bool operator==(const Example&) const = default;
};

using Dataset = std::vector<Example>;

Dataset from_corpus(const corpus::LabeledCorpus& corpus);

// Examples per class index of the task.
std::vector<std::size_t> class_counts(const Dataset& data, const classifiers::TaskSpec& task);

// JSONL: the ground-truth fields plus "origin", "method", "params",
// "identity". Repeated (dpa_id, sentence_index) pairs are allowed.
void write_dataset(const Dataset& data, std::ostream& out);
Dataset read_dataset(std::istream& in, const corpus::ProvisionCatalog& catalog,
                     const std::string& source = "<dataset>");

// ---------------------------------------------------------------------------
// Random resampling. Every function is deterministic per seed and keeps the
// surviving originals in input order; duplicates are appended grouped by class.

// Binary: negatives sampled without replacement down to the positive count.
// Multiclass: "other" sampled down to the largest provision-class count. A
// majority already at or below the target is left unchanged. An explicit
// target overrides the computed one.
Dataset random_undersample(const Dataset& data, const classifiers::TaskSpec& task,
                           std::uint64_t seed, std::optional<std::size_t> target = std::nullopt);

// Every non-empty class below the majority count (or the explicit target) is
// topped up with duplicates drawn with replacement.
Dataset random_oversample(const Dataset& data, const classifiers::TaskSpec& task,
                          std::uint64_t seed, std::optional<std::size_t> target = std::nullopt);

// Multiclass only: undersample "other" to the largest minority count, then
// oversample the remaining classes to it.
Dataset under_oversample(const Dataset& data, const classifiers::TaskSpec& task,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation

struct SynonymLexicon {
  std::string source_name;
  std::map<std::string, std::vector<std::string>> entries;  // lowercase keys
};

// "word<TAB>synonym,synonym,..." per line. Throws on an empty file or an
// entry whose only synonym is the word itself.
SynonymLexicon parse_lexicon(std::istream& in, const std::string& source_name);
SynonymLexicon load_lexicon(const std::string& path);

// Alphabetic and not in the bundled stopword list.
bool is_content_word(std::string_view token);

struct AugmentedSentence {
  corpus::Sentence base;
  std::string text;
  AugmentMethod method = AugmentMethod::kSynonym;
  std::string params;
  // The method reproduced the base text.
  bool identity = false;
};

struct AugmentResult {
  std::vector<AugmentedSentence> variants;
  // Sentences for which a method could not produce a variant.
  std::size_t dropped = 0;
  // Transport failures (back-translation).
  std::size_t failures = 0;
  std::vector<std::string> errors;
};

// One variant per sentence and lexicon, replacing up to max_replacements
// content words that have lexicon entries. No replaceable word -> dropped.
AugmentResult augment_synonym(std::span<const corpus::Sentence> positives,
                              const std::vector<SynonymLexicon>& lexicons, std::uint64_t seed,
                              std::size_t max_replacements = 2);

// variants_per_sentence variants per sentence; each replaces one seeded
// content word by its nearest vocabulary neighbour (excluding itself).
// Throws CapabilityError when the store has no vocabulary section.
AugmentResult augment_embedding(std::span<const corpus::Sentence> positives,
                                const embedding::EmbeddingStore& store,
                                std::size_t variants_per_sentence, std::uint64_t seed);

enum class NoiseOp { kSwap, kDelete, kSubstitute, kCrop };

struct NoiseConfig {
  double delete_fraction = 0.10;
  double substitute_fraction = 0.10;
  // Minimum share of tokens the crop window keeps.
  double crop_keep = 0.70;
  std::size_t min_tokens = 4;
};

// One variant per sentence and op. Sentences shorter than min_tokens skip the
// op and count as dropped.
AugmentResult augment_noise(std::span<const corpus::Sentence> positives,
                            std::span<const NoiseOp> ops,
                            const std::vector<std::string>& vocabulary, std::uint64_t seed,
                            const NoiseConfig& config = {});

// Sorted distinct content words of the sentences, used for substitution.
std::vector<std::string> content_vocabulary(std::span<const corpus::Sentence> sentences);

// Machine-translation boundary: {text, src, dst} -> {text}.
class MtClient {
 public:
  virtual ~MtClient() = default;
  virtual std::string translate(const std::string& text, const std::string& src,
                                const std::string& dst) = 0;
};

class IdentityMtClient : public MtClient {
 public:
  std::string translate(const std::string& text, const std::string&,
                        const std::string&) override {
    return text;
  }
};

// Test stub: on the leg back into the source language, rewrites whole words
// (case-insensitive) through a fixed table.
class TableMtClient : public MtClient {
 public:
  TableMtClient(std::string source_language, std::map<std::string, std::string> table)
      : source_(std::move(source_language)), table_(std::move(table)) {}
  std::string translate(const std::string& text, const std::string& src,
                        const std::string& dst) override;

 private:
  std::string source_;
  std::map<std::string, std::string> table_;
};

// POST {"text", "src", "dst"} -> {"text"}.
class HttpMtClient : public MtClient {
 public:
  explicit HttpMtClient(std::string endpoint);
  std::string translate(const std::string& text, const std::string& src,
                        const std::string& dst) override;

 private:
  std::string host_;
  std::string path_;
};

// One variant per sentence and pivot language (source -> pivot -> source).
// Transport errors are recorded per sentence; more than max_failure_rate of
// attempts failing aborts with ServiceError.
AugmentResult augment_backtranslate(std::span<const corpus::Sentence> positives, MtClient& mt,
                                    const std::vector<std::string>& pivots = {"fr", "de"},
                                    const std::string& source_language = "en",
                                    double max_failure_rate = 0.20);

// ---------------------------------------------------------------------------
// Variant recipes

enum class AugmentFamily { kBackTranslation, kSynonym, kEmbedding, kNoise };

std::string_view family_name(AugmentFamily family);

struct RecipeStep {
  enum class Kind { kUndersample, kOversample, kAugment };
  Kind kind = Kind::kUndersample;
  std::optional<std::size_t> target;
  AugmentFamily family = AugmentFamily::kNoise;
  // BT: pivot languages; SR: lexicons; ER: variants per sentence; NI: ops.
  std::size_t multiplicity = 1;

  std::string describe() const;
};

struct VariantRecipe {
  std::string name;
  std::vector<RecipeStep> steps;

  // At most one undersample and one oversample step.
  void validate() const;
};

// RU, RO, RUOS; BT, SR, ER, NI; each augmentation family followed by RUOS;
// all four families; all four followed by RUOS.
std::vector<VariantRecipe> builtin_recipes();
VariantRecipe find_recipe(std::string_view name);

struct Resources {
  std::vector<SynonymLexicon> lexicons;
  std::shared_ptr<const embedding::EmbeddingStore> store;
  std::shared_ptr<MtClient> mt;
  std::vector<std::string> pivots = {"fr", "de"};
  NoiseConfig noise;
};

struct StepRecord {
  std::string step;
  std::size_t size_after = 0;
  std::size_t dropped = 0;
  std::size_t failures = 0;
};

struct VariantManifest {
  std::string recipe;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::vector<std::pair<std::string, std::size_t>> class_counts;
  std::size_t total = 0;
  std::string dataset_digest;

  std::string to_json() const;
};

struct VariantResult {
  Dataset dataset;
  VariantManifest manifest;
};

// Applies the steps in order. Augmentation only draws from original positive
// examples (task class != "other"). Throws ValidationError naming the step
// when a required resource is missing.
VariantResult build_variant(const Dataset& train, const classifiers::TaskSpec& task,
                            const VariantRecipe& recipe, std::uint64_t seed,
                            const Resources& resources);

// Appends augmented sentences as examples.
void append_augmented(Dataset& data, const std::vector<AugmentedSentence>& variants);

}  // namespace dpacheck::balance
