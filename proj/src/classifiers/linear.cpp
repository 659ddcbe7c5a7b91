#include <algorithm>
#include <cmath>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "training.hpp"

namespace dpacheck::classifiers {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

LinearParams zero_linear(std::size_t rows, std::size_t dim) {
  return {Matrix(rows, dim), std::vector<double>(rows, 0.0)};
}

double linear_loss(Algorithm kind, const LinearParams& params, const FeatureMatrix& data,
                   std::span<const std::size_t> batch, bool binary, double l2,
                   LinearParams* grad) {
  const std::size_t rows = params.weights.rows;
  const std::size_t dim = params.weights.cols;
  std::vector<double> z(rows), dz(rows);
  double loss = 0.0;
  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

  for (auto i : batch) {
    const auto x = data.x.row(i);
    const std::size_t label = data.labels[i];
    for (std::size_t k = 0; k < rows; ++k) {
      z[k] = detail::dot(params.weights.row(k), x) + params.bias[k];
    }
    if (kind == Algorithm::kLogReg) {
      if (binary) {
        const double y = label == 0 ? 1.0 : 0.0;
        loss += softplus(z[0]) - y * z[0];
        dz[0] = sigmoid(z[0]) - y;
      } else {
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - m);
        loss += m + std::log(sum) - z[label];
        for (std::size_t k = 0; k < rows; ++k) {
          dz[k] = std::exp(z[k] - m) / sum - (k == label ? 1.0 : 0.0);
        }
      }
    } else {
      // One-vs-rest hinge; a binary task has the single positive row.
      for (std::size_t k = 0; k < rows; ++k) {
        const double y = (binary ? label == 0 : label == k) ? 1.0 : -1.0;
        const double margin = y * z[k];
        loss += std::max(0.0, 1.0 - margin);
        dz[k] = margin < 1.0 ? -y : 0.0;
      }
    }
    if (grad) {
      for (std::size_t k = 0; k < rows; ++k) {
        if (dz[k] == 0.0) continue;
        auto g = grad->weights.row(k);
        const double s = dz[k] * inv_n;
        for (std::size_t j = 0; j < dim; ++j) g[j] += s * x[j];
        grad->bias[k] += s;
      }
    }
  }
  loss *= inv_n;

  if (kind == Algorithm::kLinearSvm && l2 > 0.0) {
    double sq = 0.0;
    for (double w : params.weights.data) sq += w * w;
    loss += 0.5 * l2 * sq;
    if (grad) {
      for (std::size_t j = 0; j < params.weights.data.size(); ++j) {
        grad->weights.data[j] += l2 * params.weights.data[j];
      }
    }
  }
  return loss;
}

ClassifierModel fit_linear(Algorithm kind, const FeatureMatrix& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed) {
  if (kind != Algorithm::kLogReg && kind != Algorithm::kLinearSvm) {
    throw ValidationError("fit_linear supports logreg and linear_svm only");
  }
  task.validate();
  hp.validate();
  data.validate(task.num_classes());
  require_all_classes(data.labels, task);

  const std::size_t rows = task.is_binary() ? 1 : task.num_classes();
  LinearParams params = zero_linear(rows, data.dim());
  Rng rng(seed);
  const bool binary = task.is_binary();
  const double l2 = kind == Algorithm::kLinearSvm ? hp.l2 : 0.0;
  const auto outcome = detail::minibatch_descent(
      params, data.size(), hp, rng,
      [&](const LinearParams& p, std::span<const std::size_t> batch, LinearParams* g) {
        return linear_loss(kind, p, data, batch, binary, l2, g);
      });

  ClassifierModel model;
  model.algorithm = kind;
  model.task = task;
  model.hyperparameters = hp;
  model.meta.seed = seed;
  model.meta.epochs_run = outcome.epochs_run;
  model.meta.final_loss = outcome.final_loss;
  model.input_dim = data.dim();
  model.params = std::move(params);
  return model;
}

}  // namespace dpacheck::classifiers
