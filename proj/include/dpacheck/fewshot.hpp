#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpacheck/classifiers.hpp"

namespace dpacheck::fewshot {

using classifiers::FeatureMatrix;
using classifiers::Matrix;

// Indices into a labeled example set; target 1 for same class, 0 otherwise.
struct ContrastivePair {
  std::size_t a = 0;
  std::size_t b = 0;
  double target = 0.0;
  bool operator==(const ContrastivePair&) const = default;
};

struct PairSet {
  std::vector<ContrastivePair> pairs;
  // Pairs that could not be drawn because a class had too few members (same)
  // or the rest of the set was too small (different).
  std::size_t same_shortfall = 0;
  std::size_t different_shortfall = 0;
};

// Per example: up to R same-class and R different-class partners, drawn
// without replacement. Throws when fewer than two classes are present.
PairSet generate_pairs(std::span<const std::size_t> labels, std::size_t pairs_per_example,
                       std::uint64_t seed);

// u = P x + c.
struct Projection {
  Matrix p;
  std::vector<double> c;
  bool operator==(const Projection&) const = default;
};

Projection identity_projection(std::size_t dim);
std::vector<double> project(const Projection& proj, std::span<const double> x);
FeatureMatrix project_all(const Projection& proj, const FeatureMatrix& data);

template <typename F>
void for_each_scalar(Projection& p, F&& fn) {
  for (auto& v : p.p.data) fn(v);
  for (auto& v : p.c) fn(v);
}

// Mean over the selected pairs of (cos(Pa + c, Pb + c) - target)^2. A pair
// with a zero-length projection contributes cos = 0 and no gradient.
double contrastive_loss(const Projection& proj, const Matrix& x,
                        std::span<const ContrastivePair> pairs,
                        std::span<const std::size_t> selected, Projection* grad);

struct ContrastiveOptions {
  std::size_t pairs_per_example = 2;
  int epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
};

struct ProjectionFit {
  Projection projection;
  int epochs_run = 0;
  double final_loss = 0.0;
};

// Gradient descent from the identity. Throws DivergenceError on non-finite
// loss.
ProjectionFit train_projection(const Matrix& x, std::span<const ContrastivePair> pairs,
                               const ContrastiveOptions& options, std::uint64_t seed);

// How the few-shot training subset is chosen: a fraction of the training set
// (stratified per class) or K examples per class.
struct ShotSpec {
  std::optional<double> fraction;
  std::optional<std::size_t> per_class;

  static ShotSpec from_fraction(double f) { return {f, std::nullopt}; }
  static ShotSpec from_count(std::size_t k) { return {std::nullopt, k}; }
  // "30%" or "K=10".
  std::string describe() const;
  void validate() const;
};

// Sorted indices of the selected examples. Every class keeps at least one.
std::vector<std::size_t> select_shots(std::span<const std::size_t> labels,
                                      std::size_t num_classes, const ShotSpec& shots,
                                      std::uint64_t seed);

// Phase 1 (projection) then phase 2 (logistic head on projected vectors).
// The returned model has algorithm kFewShot and predicts via predict_scores.
classifiers::ClassifierModel fit_fewshot(const FeatureMatrix& data,
                                         const classifiers::TaskSpec& task,
                                         const classifiers::Hyperparameters& head_hp,
                                         const ContrastiveOptions& options, std::uint64_t seed);

// Selects shots, then fits on them; records the shot source in the meta.
classifiers::ClassifierModel fit_fewshot(const FeatureMatrix& data,
                                         const classifiers::TaskSpec& task,
                                         const classifiers::Hyperparameters& head_hp,
                                         const ContrastiveOptions& options, const ShotSpec& shots,
                                         std::uint64_t seed);

}  // namespace dpacheck::fewshot
