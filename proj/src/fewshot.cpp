#include "dpacheck/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "classifiers/training.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::fewshot {

using classifiers::ClassifierModel;
using classifiers::Hyperparameters;
using classifiers::TaskSpec;

PairSet generate_pairs(std::span<const std::size_t> labels, std::size_t pairs_per_example,
                       std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  if (members.size() < 2) throw ValidationError("contrastive pairs need at least two classes");

  PairSet out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Rng rng(derive_seed(seed, i, "pairs"));
    const auto& same = members[labels[i]];
    std::vector<std::size_t> partners;
    for (auto j : same) {
      if (j != i) partners.push_back(j);
    }
    const auto n_same = std::min(pairs_per_example, partners.size());
    out.same_shortfall += pairs_per_example - n_same;
    for (auto k : rng.sample_without_replacement(partners.size(), n_same)) {
      out.pairs.push_back({i, partners[k], 1.0});
    }

    std::vector<std::size_t> others;
    for (const auto& [cls, idx] : members) {
      if (cls != labels[i]) others.insert(others.end(), idx.begin(), idx.end());
    }
    std::sort(others.begin(), others.end());
    const auto n_diff = std::min(pairs_per_example, others.size());
    out.different_shortfall += pairs_per_example - n_diff;
    for (auto k : rng.sample_without_replacement(others.size(), n_diff)) {
      out.pairs.push_back({i, others[k], 0.0});
    }
  }
  return out;
}

Projection identity_projection(std::size_t dim) {
  Projection p{Matrix(dim, dim), std::vector<double>(dim, 0.0)};
  for (std::size_t i = 0; i < dim; ++i) p.p(i, i) = 1.0;
  return p;
}

std::vector<double> project(const Projection& proj, std::span<const double> x) {
  if (x.size() != proj.p.cols) throw ValidationError("projection input has wrong dimension");
  std::vector<double> u(proj.p.rows);
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] = classifiers::detail::dot(proj.p.row(k), x) + proj.c[k];
  }
  return u;
}

FeatureMatrix project_all(const Projection& proj, const FeatureMatrix& data) {
  FeatureMatrix out{Matrix(data.size(), proj.p.rows), data.labels};
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto u = project(proj, data.x.row(r));
    std::copy(u.begin(), u.end(), out.x.row(r).begin());
  }
  return out;
}

double contrastive_loss(const Projection& proj, const Matrix& x,
                        std::span<const ContrastivePair> pairs,
                        std::span<const std::size_t> selected, Projection* grad) {
  if (selected.empty()) return 0.0;
  const std::size_t d = proj.p.rows;
  const double scale = 1.0 / static_cast<double>(selected.size());
  double total = 0.0;
  for (auto s : selected) {
    const auto& pair = pairs[s];
    const auto xa = x.row(pair.a);
    const auto xb = x.row(pair.b);
    const auto u = project(proj, xa);
    const auto v = project(proj, xb);
    const double nu = std::sqrt(classifiers::detail::dot(u, u));
    const double nv = std::sqrt(classifiers::detail::dot(v, v));
    if (nu == 0.0 || nv == 0.0) {
      total += pair.target * pair.target;
      continue;
    }
    const double cos = classifiers::detail::dot(u, v) / (nu * nv);
    const double diff = cos - pair.target;
    total += diff * diff;
    if (!grad) continue;
    const double g = 2.0 * diff * scale;
    for (std::size_t k = 0; k < d; ++k) {
      const double du = g * (v[k] / (nu * nv) - cos * u[k] / (nu * nu));
      const double dv = g * (u[k] / (nu * nv) - cos * v[k] / (nv * nv));
      auto row = grad->p.row(k);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += du * xa[j] + dv * xb[j];
      grad->c[k] += du + dv;
    }
  }
  return total * scale;
}

ProjectionFit train_projection(const Matrix& x, std::span<const ContrastivePair> pairs,
                               const ContrastiveOptions& options, std::uint64_t seed) {
  if (options.epochs < 0 || options.batch_size == 0 || !(options.learning_rate > 0.0)) {
    throw ValidationError("contrastive options need epochs >= 0, batch size >= 1, lr > 0");
  }
  for (const auto& p : pairs) {
    if (p.a >= x.rows || p.b >= x.rows) throw ValidationError("pair refers to a missing example");
  }
  ProjectionFit fit{identity_projection(x.cols)};
  Hyperparameters loop;
  loop.epochs = options.epochs;
  loop.learning_rate = options.learning_rate;
  loop.batch_size = options.batch_size;
  Rng rng(derive_seed(seed, 0, "contrastive"));
  const auto outcome = classifiers::detail::minibatch_descent(
      fit.projection, pairs.size(), loop, rng,
      [&](const Projection& p, std::span<const std::size_t> batch, Projection* g) {
        return contrastive_loss(p, x, pairs, batch, g);
      });
  fit.epochs_run = outcome.epochs_run;
  fit.final_loss = outcome.final_loss;
  return fit;
}

std::string ShotSpec::describe() const {
  validate();
  if (fraction) {
    std::ostringstream out;
    out << std::round(*fraction * 1000.0) / 10.0 << "%";
    return out.str();
  }
  return "K=" + std::to_string(*per_class);
}

void ShotSpec::validate() const {
  if (fraction.has_value() == per_class.has_value()) {
    throw ValidationError("give either a shot fraction or a per-class count");
  }
  if (fraction && !(*fraction > 0.0 && *fraction <= 1.0)) {
    throw ValidationError("shot fraction must be in (0, 1]");
  }
  if (per_class && *per_class == 0) throw ValidationError("shots per class must be positive");
}

std::vector<std::size_t> select_shots(std::span<const std::size_t> labels,
                                      std::size_t num_classes, const ShotSpec& shots,
                                      std::uint64_t seed) {
  shots.validate();
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw ValidationError("label out of range");
    members[labels[i]].push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& m = members[c];
    if (m.empty()) continue;
    std::size_t k = shots.per_class
                        ? *shots.per_class
                        : static_cast<std::size_t>(std::llround(*shots.fraction * m.size()));
    k = std::clamp<std::size_t>(k, 1, m.size());
    Rng rng(derive_seed(seed, c, "shots"));
    for (auto j : rng.sample_without_replacement(m.size(), k)) out.push_back(m[j]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClassifierModel fit_fewshot(const FeatureMatrix& data, const TaskSpec& task,
                            const Hyperparameters& head_hp, const ContrastiveOptions& options,
                            std::uint64_t seed) {
  task.validate();
  data.validate(task.num_classes());
  classifiers::require_all_classes(data.labels, task);
  const auto pairs = generate_pairs(data.labels, options.pairs_per_example, seed);
  const auto fit = train_projection(data.x, pairs.pairs, options, seed);
  auto model = classifiers::fit_linear(classifiers::Algorithm::kLogReg,
                                       project_all(fit.projection, data), task, head_hp, seed);
  auto head = std::get<classifiers::LinearParams>(std::move(model.params));
  model.algorithm = classifiers::Algorithm::kFewShot;
  model.input_dim = data.dim();
  model.params = classifiers::FewShotParams{fit.projection.p, fit.projection.c, std::move(head)};
  model.meta.pairs_per_example = options.pairs_per_example;
  return model;
}

ClassifierModel fit_fewshot(const FeatureMatrix& data, const TaskSpec& task,
                            const Hyperparameters& head_hp, const ContrastiveOptions& options,
                            const ShotSpec& shots, std::uint64_t seed) {
  const auto picked = select_shots(data.labels, task.num_classes(), shots, seed);
  FeatureMatrix subset{Matrix(picked.size(), data.dim()), {}};
  for (std::size_t r = 0; r < picked.size(); ++r) {
    const auto src = data.x.row(picked[r]);
    std::copy(src.begin(), src.end(), subset.x.row(r).begin());
    subset.labels.push_back(data.labels[picked[r]]);
  }
  auto model = fit_fewshot(subset, task, head_hp, options, seed);
  model.meta.shots_source = shots.describe();
  if (shots.per_class) model.meta.shots_per_class = *shots.per_class;
  return model;
}

}  // namespace dpacheck::fewshot
