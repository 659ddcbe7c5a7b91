#pragma once

// Shared mini-batch gradient descent loop for the neural and linear models.

#include <cmath>
#include <numeric>
#include <vector>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::classifiers::detail {

template <typename Params>
void add_scaled(Params& params, Params& grad, double scale) {
  std::vector<double> g;
  for_each_scalar(grad, [&](double& v) { g.push_back(v); });
  std::size_t i = 0;
  for_each_scalar(params, [&](double& v) { v += scale * g[i++]; });
}

template <typename Params>
void zero_fill(Params& p) {
  for_each_scalar(p, [](double& v) { v = 0.0; });
}

struct LoopOutcome {
  int epochs_run = 0;
  double final_loss = 0.0;
};

// loss_fn(params, batch_indices, grad*) -> mean batch loss.
template <typename Params, typename LossFn>
LoopOutcome minibatch_descent(Params& params, std::size_t n, const Hyperparameters& hp,
                              Rng& rng, LossFn&& loss_fn) {
  LoopOutcome out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Params grad = params;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t end = std::min(n, start + hp.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      zero_fill(grad);
      const double loss = loss_fn(params, batch, &grad);
      if (!std::isfinite(loss)) throw DivergenceError(epoch, loss);
      total += loss * static_cast<double>(batch.size());
      add_scaled(params, grad, -hp.learning_rate);
    }
    out.epochs_run = epoch;
    out.final_loss = n == 0 ? 0.0 : total / static_cast<double>(n);
    if (!std::isfinite(out.final_loss)) throw DivergenceError(epoch, out.final_loss);
  }
  bool finite = true;
  for_each_scalar(params, [&](double& v) { finite = finite && std::isfinite(v); });
  if (!finite) throw DivergenceError(out.epochs_run, out.final_loss);
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace dpacheck::classifiers::detail

namespace dpacheck::classifiers {
std::vector<double> bilstm_scores(const BiLstmParams& params, const Matrix& sequence);
std::vector<double> linear_scores(Algorithm kind, const LinearParams& params, bool binary,
                                  std::span<const double> x);
}  // namespace dpacheck::classifiers
