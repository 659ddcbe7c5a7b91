#include "dpacheck/pipeline.hpp"

#include <algorithm>

#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::pipeline {

using classifiers::Algorithm;
using classifiers::ClassifierModel;
using classifiers::Matrix;
using classifiers::TaskSpec;

Featurizer::Featurizer(std::shared_ptr<embedding::EmbeddingProvider> provider,
                       preprocess::AliasTable aliases, bool word_mean_fallback)
    : provider_(std::move(provider)),
      aliases_(std::move(aliases)),
      word_mean_fallback_(word_mean_fallback) {
  if (!provider_) throw ValidationError("featurizer needs an embedding provider");
}

std::string Featurizer::normalized(std::string_view raw_text) const {
  return preprocess::normalize(raw_text, aliases_).text;
}

std::vector<double> Featurizer::vector(std::string_view raw_text) {
  const auto text = normalized(raw_text);
  embedding::EmbeddingVector v;
  const auto* store = provider_->store();
  if (store && word_mean_fallback_ && !store->find(content_hash(text))) {
    auto mean = embedding::mean_word_vector(*store, text);
    if (!mean) throw NotFoundError("no embedding and no known words for: " + text);
    ++fallbacks_;
    v = std::move(*mean);
  } else {
    v = provider_->embed(text);
  }
  return {v.begin(), v.end()};
}

Matrix Featurizer::sequence(std::string_view raw_text) {
  const auto text = normalized(raw_text);
  const auto* store = provider_->store();
  if (store && store->has_tokens()) {
    if (auto it = store->token_entries().find(content_hash(text)); it != store->token_entries().end()) {
      Matrix m(it->second.size(), store->dim());
      for (std::size_t r = 0; r < m.rows; ++r) {
        std::copy(it->second[r].begin(), it->second[r].end(), m.row(r).begin());
      }
      return m;
    }
  }
  const auto v = vector(raw_text);
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.row(0).begin());
  return m;
}

classifiers::TrainingSet training_set(const balance::Dataset& data, const TaskSpec& task,
                                      Featurizer& features, bool with_sequences) {
  classifiers::TrainingSet set;
  set.flat.x = Matrix(data.size(), features.dim());
  if (with_sequences) set.sequences = classifiers::SequenceData{features.dim(), {}, {}};
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& s = data[r].sentence;
    const auto v = features.vector(s.text);
    std::copy(v.begin(), v.end(), set.flat.x.row(r).begin());
    const auto label = task.class_of(s.gold_labels);
    set.flat.labels.push_back(label);
    if (with_sequences) {
      set.sequences->sequences.push_back(features.sequence(s.text));
      set.sequences->labels.push_back(label);
    }
  }
  return set;
}

std::string_view formulation_name(Formulation f) {
  return f == Formulation::kBinary ? "binary" : "multiclass";
}

Formulation parse_formulation(std::string_view name) {
  if (name == "binary") return Formulation::kBinary;
  if (name == "multiclass") return Formulation::kMulticlass;
  throw ValidationError("unknown task mode '" + std::string(name) + "' (binary, multiclass)");
}

namespace {

ClassifierModel train_one(const balance::Dataset& train, const TaskSpec& task,
                          const TrainPlan& plan, std::uint64_t seed, Featurizer& features) {
  balance::Dataset data = train;
  if (plan.recipe) {
    data = balance::build_variant(train, task, *plan.recipe, derive_seed(seed, 0, "variant"),
                                  plan.resources)
               .dataset;
  }
  const bool sequences = plan.algorithm == Algorithm::kBiLstm;
  const auto set = training_set(data, task, features, sequences);
  return classifiers::fit(plan.algorithm, set, task, plan.hp, seed);
}

}  // namespace

std::vector<ClassifierModel> train_all(const balance::Dataset& train,
                                       const corpus::ProvisionCatalog& catalog,
                                       const TrainPlan& plan, Featurizer& features) {
  if (!plan.binary && !plan.multiclass) throw ValidationError("nothing to train");
  plan.hp.validate();
  std::vector<ClassifierModel> models;
  if (plan.binary) {
    for (std::size_t k = 0; k < catalog.size(); ++k) {
      const auto task = TaskSpec::binary(catalog.at(k).id);
      models.push_back(train_one(train, task, plan, derive_seed(plan.seed, k, "binary"), features));
    }
  }
  if (plan.multiclass) {
    models.push_back(train_one(train, TaskSpec::multiclass(catalog), plan,
                               derive_seed(plan.seed, 0, "multiclass"), features));
  }
  return models;
}

std::vector<const ClassifierModel*> select_models(const std::vector<ClassifierModel>& models,
                                                  Formulation formulation) {
  std::vector<const ClassifierModel*> out;
  for (const auto& m : models) {
    if (m.task.is_binary() == (formulation == Formulation::kBinary)) out.push_back(&m);
  }
  if (out.empty()) {
    throw ValidationError("model file has no " + std::string(formulation_name(formulation)) + " model");
  }
  if (formulation == Formulation::kMulticlass && out.size() > 1) {
    throw ValidationError("model file has more than one multiclass model");
  }
  return out;
}

std::vector<checker::SentencePrediction> predict_dpa(
    const std::vector<const ClassifierModel*>& models, const corpus::Dpa& dpa,
    Featurizer& features, std::optional<double> threshold) {
  bool needs_sequences = false;
  for (const auto* m : models) needs_sequences = needs_sequences || m->algorithm == Algorithm::kBiLstm;
  std::vector<checker::SentencePrediction> out;
  for (const auto& s : dpa.sentences) {
    checker::SentencePrediction p{dpa.dpa_id, s.sentence_index, s.text, {}, {}};
    const auto flat = features.vector(s.text);
    std::optional<Matrix> seq;
    if (needs_sequences) seq = features.sequence(s.text);
    for (const auto* m : models) {
      const auto scores = m->algorithm == Algorithm::kBiLstm ? classifiers::predict_scores(*m, *seq)
                                                              : classifiers::predict_scores(*m, flat);
      const auto cls = classifiers::decide(*m, scores, threshold);
      if (cls == m->task.other_index()) continue;
      corpus::ProvisionId id(m->task.classes[cls]);
      p.scores[id.str()] = scores[cls];
      p.predicted_labels.push_back(std::move(id));
    }
    out.push_back(std::move(p));
  }
  return out;
}

checker::CompletenessReport check_dpa(const std::vector<const ClassifierModel*>& models,
                                      const corpus::Dpa& dpa,
                                      const corpus::ProvisionCatalog& catalog,
                                      Featurizer& features, const CheckOptions& options) {
  const auto predictions = predict_dpa(models, dpa, features, options.threshold);
  const auto agg = checker::aggregate(predictions, catalog, options.confidence_floor);
  return checker::check_completeness(dpa.dpa_id, agg, catalog, options.audit);
}

Evaluation evaluate(const std::vector<const ClassifierModel*>& models,
                    const corpus::LabeledCorpus& corpus, Featurizer& features, double beta) {
  const auto& catalog = corpus.catalog;
  Evaluation result;
  eval::SatisfiedSets predicted;
  std::vector<eval::Counts> sentence_counts(catalog.size());
  for (const auto& dpa : corpus.dpas) {
    const auto predictions = predict_dpa(models, dpa, features);
    auto report = checker::check_completeness(dpa.dpa_id, checker::aggregate(predictions, catalog),
                                              catalog);
    auto& set = predicted[dpa.dpa_id];
    for (const auto& id : report.satisfied()) set.insert(id.str());
    for (std::size_t i = 0; i < dpa.sentences.size(); ++i) {
      for (std::size_t k = 0; k < catalog.size(); ++k) {
        const auto& id = catalog.at(k).id;
        const bool gold = dpa.sentences[i].satisfies(id);
        const auto& labels = predictions[i].predicted_labels;
        const bool pred = std::find(labels.begin(), labels.end(), id) != labels.end();
        auto& c = sentence_counts[k];
        (gold ? (pred ? c.tp : c.fn) : (pred ? c.fp : c.tn)) += 1;
      }
    }
    result.reports.push_back(std::move(report));
  }
  result.dpa_level = eval::compute_metrics(eval::dpa_confusion(eval::satisfied_sets(corpus), predicted, catalog), beta);
  eval::ProvisionConfusion sentence_conf;
  sentence_conf.dpas = corpus.dpas.size();
  for (std::size_t k = 0; k < catalog.size(); ++k) {
    sentence_conf.per_provision.emplace_back(catalog.at(k).id.str(), sentence_counts[k]);
  }
  result.sentence_level = eval::compute_metrics(sentence_conf, beta);
  return result;
}

corpus::Dpa dpa_from_text(const std::string& dpa_id, std::string_view text) {
  corpus::Dpa dpa{dpa_id, {}};
  const auto sentences = preprocess::split_sentences(text);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    dpa.sentences.push_back({dpa_id, i, sentences[i], {}});
  }
  return dpa;
}

}  // namespace dpacheck::pipeline
