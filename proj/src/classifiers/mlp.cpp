#include <algorithm>
#include <cmath>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "training.hpp"

namespace dpacheck::classifiers {

MlpParams zero_mlp(std::size_t dim, const std::vector<std::size_t>& hidden, std::size_t classes) {
  MlpParams p;
  std::size_t in = dim;
  for (auto h : hidden) {
    p.layers.push_back({Matrix(h, in), std::vector<double>(h, 0.0)});
    in = h;
  }
  p.layers.push_back({Matrix(classes, in), std::vector<double>(classes, 0.0)});
  return p;
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(layer.weights.rows);
  for (std::size_t k = 0; k < layer.weights.rows; ++k) {
    out[k] = detail::dot(layer.weights.row(k), in) + layer.bias[k];
  }
}

}  // namespace

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x) {
  std::vector<double> act(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    affine(params.layers[l], act, next);
    if (l + 1 < params.layers.size()) {
      for (auto& v : next) v = std::max(v, 0.0);
    }
    act.swap(next);
  }
  softmax_inplace(act);
  return act;
}

double mlp_loss(const MlpParams& params, const FeatureMatrix& data,
                std::span<const std::size_t> batch, double dropout, Rng* dropout_rng,
                MlpParams* grad) {
  const std::size_t layers = params.layers.size();
  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  const double keep = 1.0 - dropout;
  double loss = 0.0;

  // acts[0] is the input; acts[l + 1] is the (post-activation, post-dropout)
  // output of layer l. masks[l] scales hidden unit outputs.
  std::vector<std::vector<double>> acts(layers + 1), pre(layers), masks(layers);
  std::vector<double> delta, prev_delta;

  for (auto i : batch) {
    const auto x = data.x.row(i);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      affine(params.layers[l], acts[l], pre[l]);
      acts[l + 1] = pre[l];
      if (l + 1 < layers) {
        masks[l].assign(pre[l].size(), 1.0);
        for (std::size_t k = 0; k < pre[l].size(); ++k) {
          if (dropout_rng && dropout > 0.0) {
            masks[l][k] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
          }
          acts[l + 1][k] = std::max(pre[l][k], 0.0) * masks[l][k];
        }
      }
    }
    auto& probs = acts[layers];
    softmax_inplace(probs);
    const std::size_t label = data.labels[i];
    loss -= std::log(std::max(probs[label], 1e-300));
    if (!grad) continue;

    delta = probs;
    delta[label] -= 1.0;
    for (std::size_t l = layers; l-- > 0;) {
      auto& g = grad->layers[l];
      const auto& in = acts[l];
      for (std::size_t k = 0; k < delta.size(); ++k) {
        const double s = delta[k] * inv_n;
        if (s == 0.0) continue;
        auto row = g.weights.row(k);
        for (std::size_t j = 0; j < in.size(); ++j) row[j] += s * in[j];
        g.bias[k] += s;
      }
      if (l == 0) break;
      const auto& w = params.layers[l].weights;
      prev_delta.assign(w.cols, 0.0);
      for (std::size_t k = 0; k < w.rows; ++k) {
        const auto row = w.row(k);
        for (std::size_t j = 0; j < w.cols; ++j) prev_delta[j] += row[j] * delta[k];
      }
      for (std::size_t j = 0; j < prev_delta.size(); ++j) {
        prev_delta[j] *= (pre[l - 1][j] > 0.0 ? 1.0 : 0.0) * masks[l - 1][j];
      }
      delta.swap(prev_delta);
    }
  }
  return loss * inv_n;
}

ClassifierModel fit_mlp(const FeatureMatrix& data, const TaskSpec& task,
                        const Hyperparameters& hp, std::uint64_t seed) {
  task.validate();
  hp.validate();
  data.validate(task.num_classes());
  require_all_classes(data.labels, task);

  MlpParams params = zero_mlp(data.dim(), hp.hidden_sizes, task.num_classes());
  Rng init(derive_seed(seed, 0, "mlp-init"));
  for (auto& layer : params.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols));
    for (auto& w : layer.weights.data) w = init.uniform(-bound, bound);
  }
  Rng order(seed);
  Rng dropout(derive_seed(seed, 0, "mlp-dropout"));
  const auto outcome = detail::minibatch_descent(
      params, data.size(), hp, order,
      [&](const MlpParams& p, std::span<const std::size_t> batch, MlpParams* g) {
        return mlp_loss(p, data, batch, hp.dropout, &dropout, g);
      });

  ClassifierModel model;
  model.algorithm = Algorithm::kMlp;
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
