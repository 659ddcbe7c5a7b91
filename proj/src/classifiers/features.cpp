#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"

namespace dpacheck::classifiers {

TaskSpec TaskSpec::binary(const corpus::ProvisionId& provision) {
  return {TaskMode::kBinary, {provision.str(), std::string(corpus::kOtherLabel)}};
}

TaskSpec TaskSpec::multiclass(const corpus::ProvisionCatalog& catalog) {
  TaskSpec t{TaskMode::kMulticlass, {}};
  for (const auto& p : catalog.provisions()) t.classes.push_back(p.id.str());
  t.classes.emplace_back(corpus::kOtherLabel);
  return t;
}

std::size_t TaskSpec::class_of(const std::vector<corpus::ProvisionId>& labels) const {
  if (is_binary()) {
    const bool positive = std::any_of(labels.begin(), labels.end(),
                                      [&](const auto& l) { return l.str() == provision(); });
    return positive ? 0 : 1;
  }
  if (labels.empty()) return other_index();
  auto idx = index_of(labels.front().str());
  if (!idx) throw ValidationError("unknown provision " + labels.front().str());
  return *idx;
}

std::optional<std::size_t> TaskSpec::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == label) return i;
  }
  return std::nullopt;
}

void TaskSpec::validate() const {
  if (classes.empty() || classes.back() != corpus::kOtherLabel) {
    throw ValidationError("task classes must end with \"other\"");
  }
  if (is_binary() && classes.size() != 2) {
    throw ValidationError("binary task must have exactly 2 classes");
  }
  if (!is_binary() && classes.size() < 2) {
    throw ValidationError("multiclass task needs at least one provision class");
  }
}

void FeatureMatrix::validate(std::size_t num_classes) const {
  if (x.data.size() != x.rows * x.cols) throw ValidationError("feature matrix shape mismatch");
  if (labels.size() != x.rows) {
    throw ValidationError("feature rows (" + std::to_string(x.rows) + ") and labels (" +
                          std::to_string(labels.size()) + ") disagree");
  }
  for (auto l : labels) {
    if (l >= num_classes) throw ValidationError("label index " + std::to_string(l) + " out of range");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
  }
}

void SequenceData::validate(std::size_t num_classes) const {
  if (labels.size() != sequences.size()) throw ValidationError("sequence count and labels disagree");
  for (const auto& s : sequences) {
    if (s.rows == 0) throw ValidationError("empty token sequence");
    if (s.cols != dim) throw ValidationError("token vector dimension mismatch");
  }
  for (auto l : labels) {
    if (l >= num_classes) throw ValidationError("label index " + std::to_string(l) + " out of range");
  }
}

SequenceData SequenceData::from_rows(const FeatureMatrix& features) {
  SequenceData s;
  s.dim = features.dim();
  s.labels = features.labels;
  s.sequences.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    Matrix m(1, s.dim);
    std::copy(features.x.row(i).begin(), features.x.row(i).end(), m.data.begin());
    s.sequences.push_back(std::move(m));
  }
  return s;
}

SequenceData TrainingSet::sequence_view() const {
  return sequences ? *sequences : SequenceData::from_rows(flat);
}

void require_all_classes(std::span<const std::size_t> labels, const TaskSpec& task) {
  std::vector<std::size_t> counts(task.num_classes(), 0);
  for (auto l : labels) {
    if (l < counts.size()) ++counts[l];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ValidationError("no training examples for class " + task.classes[c]);
    }
  }
}

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kLogReg: return "logreg";
    case Algorithm::kLinearSvm: return "linear_svm";
    case Algorithm::kRandomForest: return "random_forest";
    case Algorithm::kMlp: return "mlp";
    case Algorithm::kBiLstm: return "bilstm";
    case Algorithm::kFewShot: return "fewshot";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::kLogReg, Algorithm::kLinearSvm, Algorithm::kRandomForest,
                 Algorithm::kMlp, Algorithm::kBiLstm, Algorithm::kFewShot}) {
    if (algorithm_name(a) == name) return a;
  }
  if (name == "lr") return Algorithm::kLogReg;
  if (name == "svm") return Algorithm::kLinearSvm;
  if (name == "rf") return Algorithm::kRandomForest;
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

void Hyperparameters::validate() const {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (l2 < 0.0) throw ValidationError("l2 must be non-negative");
  if (n_trees == 0) throw ValidationError("n_trees must be positive");
  if (min_leaf == 0) throw ValidationError("min_leaf must be positive");
  if (lstm_hidden == 0) throw ValidationError("lstm_hidden must be positive");
  for (auto h : hidden_sizes) {
    if (h == 0) throw ValidationError("hidden layer sizes must be positive");
  }
}

std::string Hyperparameters::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["dropout"] = dropout;
  j["l2"] = l2;
  j["n_trees"] = n_trees;
  j["max_depth"] = max_depth;
  j["min_leaf"] = min_leaf;
  j["hidden_sizes"] = hidden_sizes;
  j["lstm_hidden"] = lstm_hidden;
  return j.dump();
}

Hyperparameters Hyperparameters::from_json(std::string_view text) {
  Hyperparameters hp;
  try {
    const auto j = nlohmann::json::parse(text);
    hp.batch_size = j.value("batch_size", hp.batch_size);
    hp.epochs = j.value("epochs", hp.epochs);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.dropout = j.value("dropout", hp.dropout);
    hp.l2 = j.value("l2", hp.l2);
    hp.n_trees = j.value("n_trees", hp.n_trees);
    hp.max_depth = j.value("max_depth", hp.max_depth);
    hp.min_leaf = j.value("min_leaf", hp.min_leaf);
    hp.hidden_sizes = j.value("hidden_sizes", hp.hidden_sizes);
    hp.lstm_hidden = j.value("lstm_hidden", hp.lstm_hidden);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad hyperparameters: ") + e.what());
  }
  hp.validate();
  return hp;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void softmax_inplace(std::span<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

}  // namespace dpacheck::classifiers
