#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dpacheck/corpus.hpp"

namespace dpacheck {
class Rng;
}

namespace dpacheck::classifiers {

// ---------------------------------------------------------------------------
// Tasks and data

enum class TaskMode { kBinary, kMulticlass };

// Binary: classes = {provision, "other"}, positive class index 0.
// Multiclass: classes = catalog ids in catalog order, then "other".
struct TaskSpec {
  TaskMode mode = TaskMode::kMulticlass;
  std::vector<std::string> classes;

  static TaskSpec binary(const corpus::ProvisionId& provision);
  static TaskSpec multiclass(const corpus::ProvisionCatalog& catalog);

  bool is_binary() const { return mode == TaskMode::kBinary; }
  std::size_t num_classes() const { return classes.size(); }
  std::size_t other_index() const { return classes.size() - 1; }
  const std::string& provision() const { return classes.front(); }

  // Binary: 0 when the labels contain the provision. Multiclass: the first
  // label in catalog order (labels arrive sorted that way), "other" when none.
  std::size_t class_of(const std::vector<corpus::ProvisionId>& labels) const;
  std::optional<std::size_t> index_of(std::string_view label) const;

  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct FeatureMatrix {
  Matrix x;
  std::vector<std::size_t> labels;

  std::size_t size() const { return x.rows; }
  std::size_t dim() const { return x.cols; }
  // Rows/labels agree, every label < num_classes, every value finite.
  void validate(std::size_t num_classes) const;
};

// One (length x dim) matrix per example.
struct SequenceData {
  std::size_t dim = 0;
  std::vector<Matrix> sequences;
  std::vector<std::size_t> labels;

  std::size_t size() const { return sequences.size(); }
  void validate(std::size_t num_classes) const;
  // Each row of a FeatureMatrix as a length-1 sequence.
  static SequenceData from_rows(const FeatureMatrix& features);
};

// Throws ValidationError naming the first class without examples.
void require_all_classes(std::span<const std::size_t> labels, const TaskSpec& task);

// ---------------------------------------------------------------------------
// Hyperparameters and models

enum class Algorithm { kLogReg, kLinearSvm, kRandomForest, kMlp, kBiLstm, kFewShot };

std::string_view algorithm_name(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

struct Hyperparameters {
  std::size_t batch_size = 32;
  int epochs = 25;
  double learning_rate = 0.01;
  double dropout = 0.3;
  // Linear SVM regularization strength.
  double l2 = 1e-3;
  // Random forest.
  std::size_t n_trees = 51;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 1;
  // MLP hidden layer widths.
  std::vector<std::size_t> hidden_sizes = {64};
  // BiLSTM hidden width per direction.
  std::size_t lstm_hidden = 16;

  void validate() const;
  std::string to_json() const;
  static Hyperparameters from_json(std::string_view text);
  bool operator==(const Hyperparameters&) const = default;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_loss = 0.0;
  // Few-shot bookkeeping; empty for other algorithms.
  std::string shots_source;
  std::size_t shots_per_class = 0;
  std::size_t pairs_per_example = 0;
  bool operator==(const TrainingMeta&) const = default;
};

// Logistic regression and linear SVM. Binary tasks use a single row scoring
// the positive class; multiclass uses one row per class.
struct LinearParams {
  Matrix weights;
  std::vector<double> bias;
  bool operator==(const LinearParams&) const = default;
};

struct TreeNode {
  // -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  // Class distribution of the training samples that reached the node.
  std::vector<double> distribution;
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;
  bool operator==(const Tree&) const = default;
};

struct ForestParams {
  std::vector<Tree> trees;
  bool operator==(const ForestParams&) const = default;
};

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  // Hidden layers followed by the output layer.
  std::vector<DenseLayer> layers;
  bool operator==(const MlpParams&) const = default;
};

// Gate blocks are stacked in the order input, forget, candidate, output.
struct LstmCell {
  Matrix w;  // 4h x d
  Matrix u;  // 4h x h
  std::vector<double> b;  // 4h
  std::size_t hidden() const { return u.cols; }
  bool operator==(const LstmCell&) const = default;
};

struct BiLstmParams {
  LstmCell forward;
  LstmCell backward;
  DenseLayer output;  // K x 2h
  bool operator==(const BiLstmParams&) const = default;
};

// Linear projection of frozen embeddings followed by a logistic head.
struct FewShotParams {
  Matrix projection;  // d x d
  std::vector<double> projection_bias;
  LinearParams head;
  bool operator==(const FewShotParams&) const = default;
};

using ModelParams =
    std::variant<LinearParams, ForestParams, MlpParams, BiLstmParams, FewShotParams>;

struct ClassifierModel {
  Algorithm algorithm = Algorithm::kLogReg;
  TaskSpec task;
  Hyperparameters hyperparameters;
  TrainingMeta meta;
  std::size_t input_dim = 0;
  ModelParams params;

  bool operator==(const ClassifierModel&) const = default;
};

// ---------------------------------------------------------------------------
// Training. All trainers are deterministic for a fixed seed.

ClassifierModel fit_linear(Algorithm kind, const FeatureMatrix& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed);
ClassifierModel fit_forest(const FeatureMatrix& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed);
ClassifierModel fit_mlp(const FeatureMatrix& data, const TaskSpec& task,
                        const Hyperparameters& hp, std::uint64_t seed);
ClassifierModel fit_bilstm(const SequenceData& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed);

// Training input for any algorithm: flat features plus, for the BiLSTM,
// token sequences (falls back to length-1 sequences of the flat rows when
// absent).
struct TrainingSet {
  FeatureMatrix flat;
  std::optional<SequenceData> sequences;

  SequenceData sequence_view() const;
};

ClassifierModel fit(Algorithm algorithm, const TrainingSet& data, const TaskSpec& task,
                    const Hyperparameters& hp, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Prediction

// Probabilistic heads return probabilities summing to 1; the SVM returns
// margins. Index order follows task.classes.
std::vector<double> predict_scores(const ClassifierModel& model, std::span<const double> features);
// BiLSTM sequence input; other algorithms require a length-1 sequence.
std::vector<double> predict_scores(const ClassifierModel& model, const Matrix& sequence);

// Default binary threshold: 0.5 for probabilities, 0 for SVM margins.
double default_threshold(const ClassifierModel& model);

// Binary: positive (0) iff scores[0] > threshold, else "other". Multiclass:
// argmax with ties to the lowest index.
std::size_t decide(const ClassifierModel& model, std::span<const double> scores,
                   std::optional<double> threshold = std::nullopt);

std::size_t argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Losses and gradients, exposed for gradient checking. The loss is the mean
// over the given row indices; gradients (when requested) have the shape of
// the parameters.

double sigmoid(double z);
void softmax_inplace(std::span<double> logits);

double linear_loss(Algorithm kind, const LinearParams& params, const FeatureMatrix& data,
                   std::span<const std::size_t> batch, bool binary, double l2,
                   LinearParams* grad);

// dropout_rng == nullptr disables dropout (evaluation mode).
double mlp_loss(const MlpParams& params, const FeatureMatrix& data,
                std::span<const std::size_t> batch, double dropout, Rng* dropout_rng,
                MlpParams* grad);
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x);

// 1 - sum p_k^2 over the normalized counts; 0 for an empty node.
double gini_impurity(std::span<const double> class_counts);

// Class counts of the training samples at the leaf reached by x.
std::vector<double> tree_predict(const Tree& tree, std::span<const double> x);

double bilstm_loss(const BiLstmParams& params, const SequenceData& data,
                   std::span<const std::size_t> batch, BiLstmParams* grad);

// Hidden state trajectory of one direction. reverse = true consumes the
// sequence from its last row to its first; the trajectory is in consumption
// order.
std::vector<std::vector<double>> lstm_run(const LstmCell& cell, const Matrix& sequence,
                                          bool reverse);

// Zero-valued parameter sets of the right shape.
LinearParams zero_linear(std::size_t rows, std::size_t dim);
MlpParams zero_mlp(std::size_t dim, const std::vector<std::size_t>& hidden, std::size_t classes);
BiLstmParams zero_bilstm(std::size_t dim, std::size_t hidden, std::size_t classes);

// Calls fn(double&) on every scalar parameter, in a fixed order.
template <typename F>
void for_each_scalar(LinearParams& p, F&& fn) {
  for (auto& v : p.weights.data) fn(v);
  for (auto& v : p.bias) fn(v);
}
template <typename F>
void for_each_scalar(DenseLayer& l, F&& fn) {
  for (auto& v : l.weights.data) fn(v);
  for (auto& v : l.bias) fn(v);
}
template <typename F>
void for_each_scalar(MlpParams& p, F&& fn) {
  for (auto& l : p.layers) for_each_scalar(l, fn);
}
template <typename F>
void for_each_scalar(LstmCell& c, F&& fn) {
  for (auto& v : c.w.data) fn(v);
  for (auto& v : c.u.data) fn(v);
  for (auto& v : c.b) fn(v);
}
template <typename F>
void for_each_scalar(BiLstmParams& p, F&& fn) {
  for_each_scalar(p.forward, fn);
  for_each_scalar(p.backward, fn);
  for_each_scalar(p.output, fn);
}

// ---------------------------------------------------------------------------
// Model files: a versioned binary container holding one or more models.
//   "DPAMODEL" u32 version, u32 model count, then per model the algorithm
//   tag, task, hyperparameters (JSON), training meta, input dim and named
//   f64 parameter blobs.

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_models(const std::vector<ClassifierModel>& models);
std::vector<ClassifierModel> parse_models(std::string_view bytes);
void save_models(const std::vector<ClassifierModel>& models, const std::string& path);
std::vector<ClassifierModel> load_models(const std::string& path);

// ---------------------------------------------------------------------------
// Grid search

// Empty lists keep the base value. Enumeration order: batch size, epochs,
// learning rate, tree count, max depth, hidden sizes, LSTM width; the last
// list varies fastest.
struct Grid {
  std::vector<std::size_t> batch_sizes;
  std::vector<int> epochs;
  std::vector<double> learning_rates;
  std::vector<std::size_t> n_trees;
  std::vector<std::size_t> max_depths;
  std::vector<std::vector<std::size_t>> hidden_sizes;
  std::vector<std::size_t> lstm_hidden;

  // Batch sizes 32/64/128, epochs 25/50/100, learning rates 0.01/0.0001.
  static Grid standard();
  std::vector<Hyperparameters> enumerate(const Hyperparameters& base) const;
};

struct GridCell {
  Hyperparameters hyperparameters;
  double score = 0.0;
  std::string status;  // "ok" or the fit error
};

struct GridResult {
  Hyperparameters best;
  std::size_t best_index = 0;
  std::vector<GridCell> leaderboard;
};

// Selects by F2 on the validation set: the positive class for binary tasks,
// macro-F2 over provision classes (excluding "other") for multiclass. Ties go
// to the first enumerated cell. Fit errors are recorded, not thrown.
GridResult grid_search(Algorithm algorithm, const Grid& grid, const Hyperparameters& base,
                       const TrainingSet& train, const TrainingSet& val, const TaskSpec& task,
                       std::uint64_t seed);

// Validation F2 as used by grid_search.
double selection_f2(const ClassifierModel& model, const TrainingSet& data);

std::string render_leaderboard_tsv(const GridResult& result);

}  // namespace dpacheck::classifiers
