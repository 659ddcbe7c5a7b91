#include <algorithm>
#include <cmath>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "training.hpp"

namespace dpacheck::classifiers {

namespace {

LstmCell zero_cell(std::size_t dim, std::size_t hidden) {
  return {Matrix(4 * hidden, dim), Matrix(4 * hidden, hidden), std::vector<double>(4 * hidden, 0.0)};
}

// Per-step activations kept for backpropagation.
struct Step {
  std::size_t row;  // row of the input sequence consumed at this step
  std::vector<double> h_prev, c_prev, i, f, g, o, c, tanh_c, h;
};

std::vector<Step> run_cell(const LstmCell& cell, const Matrix& seq, bool reverse) {
  const std::size_t h = cell.hidden();
  const std::size_t T = seq.rows;
  std::vector<Step> steps(T);
  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0), z(4 * h);
  for (std::size_t t = 0; t < T; ++t) {
    Step& s = steps[t];
    s.row = reverse ? T - 1 - t : t;
    const auto x = seq.row(s.row);
    for (std::size_t k = 0; k < 4 * h; ++k) {
      z[k] = detail::dot(cell.w.row(k), x) + detail::dot(cell.u.row(k), h_prev) + cell.b[k];
    }
    s.h_prev = h_prev;
    s.c_prev = c_prev;
    s.i.resize(h);
    s.f.resize(h);
    s.g.resize(h);
    s.o.resize(h);
    s.c.resize(h);
    s.tanh_c.resize(h);
    s.h.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
      s.i[k] = sigmoid(z[k]);
      s.f[k] = sigmoid(z[h + k]);
      s.g[k] = std::tanh(z[2 * h + k]);
      s.o[k] = sigmoid(z[3 * h + k]);
      s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
      s.tanh_c[k] = std::tanh(s.c[k]);
      s.h[k] = s.o[k] * s.tanh_c[k];
    }
    h_prev = s.h;
    c_prev = s.c;
  }
  return steps;
}

// Backpropagates dh (gradient w.r.t. the final hidden state) through time.
void backprop_cell(const LstmCell& cell, const Matrix& seq, const std::vector<Step>& steps,
                   std::vector<double> dh, double scale, LstmCell& grad) {
  const std::size_t h = cell.hidden();
  std::vector<double> dc(h, 0.0), dz(4 * h), dh_prev(h);
  for (std::size_t t = steps.size(); t-- > 0;) {
    const Step& s = steps[t];
    for (std::size_t k = 0; k < h; ++k) {
      const double d_o = dh[k] * s.tanh_c[k];
      dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      const double d_i = dc[k] * s.g[k];
      const double d_g = dc[k] * s.i[k];
      const double d_f = dc[k] * s.c_prev[k];
      dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
      dz[h + k] = d_f * s.f[k] * (1.0 - s.f[k]);
      dz[2 * h + k] = d_g * (1.0 - s.g[k] * s.g[k]);
      dz[3 * h + k] = d_o * s.o[k] * (1.0 - s.o[k]);
      dc[k] *= s.f[k];
    }
    const auto x = seq.row(s.row);
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t k = 0; k < 4 * h; ++k) {
      const double d = dz[k] * scale;
      if (dz[k] == 0.0) continue;
      auto gw = grad.w.row(k);
      for (std::size_t j = 0; j < x.size(); ++j) gw[j] += d * x[j];
      auto gu = grad.u.row(k);
      const auto u = cell.u.row(k);
      for (std::size_t j = 0; j < h; ++j) {
        gu[j] += d * s.h_prev[j];
        dh_prev[j] += u[j] * dz[k];
      }
      grad.b[k] += d;
    }
    dh = dh_prev;
  }
}

std::vector<double> representation(const std::vector<Step>& fwd, const std::vector<Step>& bwd) {
  std::vector<double> rep(fwd.back().h);
  rep.insert(rep.end(), bwd.back().h.begin(), bwd.back().h.end());
  return rep;
}

std::vector<double> logits_of(const DenseLayer& out, const std::vector<double>& rep) {
  std::vector<double> z(out.weights.rows);
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = detail::dot(out.weights.row(k), rep) + out.bias[k];
  }
  return z;
}

}  // namespace

BiLstmParams zero_bilstm(std::size_t dim, std::size_t hidden, std::size_t classes) {
  return {zero_cell(dim, hidden), zero_cell(dim, hidden),
          {Matrix(classes, 2 * hidden), std::vector<double>(classes, 0.0)}};
}

std::vector<std::vector<double>> lstm_run(const LstmCell& cell, const Matrix& sequence,
                                          bool reverse) {
  std::vector<std::vector<double>> out;
  for (auto& s : run_cell(cell, sequence, reverse)) out.push_back(std::move(s.h));
  return out;
}

std::vector<double> bilstm_scores(const BiLstmParams& params, const Matrix& sequence) {
  if (sequence.rows == 0) throw ValidationError("empty token sequence");
  const auto fwd = run_cell(params.forward, sequence, false);
  const auto bwd = run_cell(params.backward, sequence, true);
  auto z = logits_of(params.output, representation(fwd, bwd));
  softmax_inplace(z);
  return z;
}

double bilstm_loss(const BiLstmParams& params, const SequenceData& data,
                   std::span<const std::size_t> batch, BiLstmParams* grad) {
  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  const std::size_t h = params.forward.hidden();
  double loss = 0.0;
  for (auto i : batch) {
    const Matrix& seq = data.sequences[i];
    const auto fwd = run_cell(params.forward, seq, false);
    const auto bwd = run_cell(params.backward, seq, true);
    const auto rep = representation(fwd, bwd);
    auto p = logits_of(params.output, rep);
    softmax_inplace(p);
    const std::size_t label = data.labels[i];
    loss -= std::log(std::max(p[label], 1e-300));
    if (!grad) continue;

    p[label] -= 1.0;  // d loss / d logits
    std::vector<double> drep(2 * h, 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double s = p[k] * inv_n;
      auto gw = grad->output.weights.row(k);
      const auto w = params.output.weights.row(k);
      for (std::size_t j = 0; j < 2 * h; ++j) {
        gw[j] += s * rep[j];
        drep[j] += w[j] * p[k];
      }
      grad->output.bias[k] += s;
    }
    backprop_cell(params.forward, seq, fwd, {drep.begin(), drep.begin() + h}, inv_n, grad->forward);
    backprop_cell(params.backward, seq, bwd, {drep.begin() + h, drep.end()}, inv_n, grad->backward);
  }
  return loss * inv_n;
}

ClassifierModel fit_bilstm(const SequenceData& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed) {
  task.validate();
  hp.validate();
  data.validate(task.num_classes());
  require_all_classes(data.labels, task);

  BiLstmParams params = zero_bilstm(data.dim, hp.lstm_hidden, task.num_classes());
  Rng init(derive_seed(seed, 0, "bilstm-init"));
  const double cell_bound = 1.0 / std::sqrt(static_cast<double>(hp.lstm_hidden));
  for (auto* cell : {&params.forward, &params.backward}) {
    for (auto& v : cell->w.data) v = init.uniform(-cell_bound, cell_bound);
    for (auto& v : cell->u.data) v = init.uniform(-cell_bound, cell_bound);
  }
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(2 * hp.lstm_hidden));
  for (auto& v : params.output.weights.data) v = init.uniform(-out_bound, out_bound);

  Rng order(seed);
  const auto outcome = detail::minibatch_descent(
      params, data.size(), hp, order,
      [&](const BiLstmParams& p, std::span<const std::size_t> batch, BiLstmParams* g) {
        return bilstm_loss(p, data, batch, g);
      });

  ClassifierModel model;
  model.algorithm = Algorithm::kBiLstm;
  model.task = task;
  model.hyperparameters = hp;
  model.meta.seed = seed;
  model.meta.epochs_run = outcome.epochs_run;
  model.meta.final_loss = outcome.final_loss;
  model.input_dim = data.dim;
  model.params = std::move(params);
  return model;
}

}  // namespace dpacheck::classifiers
