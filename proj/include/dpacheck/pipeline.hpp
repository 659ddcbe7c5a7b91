#pragma once

// Glue between the modules: embedding lookup for sentences, training the
// per-provision and multiclass models, and turning a DPA into a report.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpacheck/balance.hpp"
#include "dpacheck/checker.hpp"
#include "dpacheck/classifiers.hpp"
#include "dpacheck/corpus.hpp"
#include "dpacheck/embedding.hpp"
#include "dpacheck/eval.hpp"
#include "dpacheck/preprocess.hpp"

namespace dpacheck::pipeline {

// Normalizes party names, then asks the provider. When the provider is
// store-backed and the sentence is missing (augmented text, say), the mean
// of the vocabulary vectors of its words is used if allowed.
class Featurizer {
 public:
  Featurizer(std::shared_ptr<embedding::EmbeddingProvider> provider,
             preprocess::AliasTable aliases = {}, bool word_mean_fallback = true);

  std::size_t dim() const { return provider_->dim(); }
  std::string normalized(std::string_view raw_text) const;
  std::vector<double> vector(std::string_view raw_text);
  // Token vectors when the store has them for this sentence, else a single
  // row holding the sentence vector.
  classifiers::Matrix sequence(std::string_view raw_text);
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  std::shared_ptr<embedding::EmbeddingProvider> provider_;
  preprocess::AliasTable aliases_;
  bool word_mean_fallback_;
  std::size_t fallbacks_ = 0;
};

classifiers::TrainingSet training_set(const balance::Dataset& data,
                                      const classifiers::TaskSpec& task, Featurizer& features,
                                      bool with_sequences);

enum class Formulation { kBinary, kMulticlass };

std::string_view formulation_name(Formulation f);
Formulation parse_formulation(std::string_view name);

struct TrainPlan {
  classifiers::Algorithm algorithm = classifiers::Algorithm::kLogReg;
  classifiers::Hyperparameters hp;
  std::uint64_t seed = 0;
  bool binary = true;
  bool multiclass = true;
  // Applied separately to each task's training data.
  std::optional<balance::VariantRecipe> recipe;
  balance::Resources resources;
};

// One binary model per catalog provision (catalog order), then the
// multiclass model, as requested by the plan.
std::vector<classifiers::ClassifierModel> train_all(const balance::Dataset& train,
                                                    const corpus::ProvisionCatalog& catalog,
                                                    const TrainPlan& plan, Featurizer& features);

// Picks the models of one formulation out of a model file: all binary models
// or the single multiclass one.
std::vector<const classifiers::ClassifierModel*> select_models(
    const std::vector<classifiers::ClassifierModel>& models, Formulation formulation);

// threshold overrides the binary decision threshold of every binary model.
std::vector<checker::SentencePrediction> predict_dpa(
    const std::vector<const classifiers::ClassifierModel*>& models, const corpus::Dpa& dpa,
    Featurizer& features, std::optional<double> threshold = std::nullopt);

struct CheckOptions {
  std::optional<double> threshold;
  std::optional<double> confidence_floor;
  checker::AuditInfo audit;
};

checker::CompletenessReport check_dpa(
    const std::vector<const classifiers::ClassifierModel*>& models, const corpus::Dpa& dpa,
    const corpus::ProvisionCatalog& catalog, Featurizer& features, const CheckOptions& options = {});

struct Evaluation {
  eval::MetricsSummary dpa_level;
  // One-vs-rest counts per catalog provision over sentences.
  eval::MetricsSummary sentence_level;
  std::vector<checker::CompletenessReport> reports;
};

// Checks every DPA of the corpus and scores the verdicts against its gold
// labels.
Evaluation evaluate(const std::vector<const classifiers::ClassifierModel*>& models,
                    const corpus::LabeledCorpus& corpus, Featurizer& features,
                    double beta = 2.0);

// A DPA read from plain text: sentence split, indices in order.
corpus::Dpa dpa_from_text(const std::string& dpa_id, std::string_view text);

}  // namespace dpacheck::pipeline
