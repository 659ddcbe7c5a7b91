#include <algorithm>
#include <cmath>
#include <thread>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::classifiers {

double gini_impurity(std::span<const double> class_counts) {
  double total = 0.0;
  for (double c : class_counts) total += c;
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double c : class_counts) sq += (c / total) * (c / total);
  return 1.0 - sq;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& data, std::size_t classes, const Hyperparameters& hp, Rng& rng)
      : data_(data), classes_(classes), hp_(hp), rng_(rng) {
    const auto d = data.dim();
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
    mtry_ = std::min(mtry_, d);
  }

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    grow(tree, std::move(samples), 0);
    return tree;
  }

 private:
  std::vector<double> counts(const std::vector<std::size_t>& samples) const {
    std::vector<double> c(classes_, 0.0);
    for (auto s : samples) c[data_.labels[s]] += 1.0;
    return c;
  }

  std::uint32_t grow(Tree& tree, std::vector<std::size_t> samples, std::size_t depth) {
    const auto index = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    auto dist = counts(samples);
    const double parent = gini_impurity(dist);
    const double total = static_cast<double>(samples.size());
    for (auto& v : dist) v /= total;
    tree.nodes[index].distribution = dist;

    if (depth >= hp_.max_depth || parent == 0.0 || samples.size() < 2 * hp_.min_leaf) {
      return index;
    }
    const auto split = best_split(samples);
    if (split.feature < 0 || split.impurity >= parent - 1e-12) return index;

    std::vector<std::size_t> left, right;
    for (auto s : samples) {
      (data_.x(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
          .push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const auto l = grow(tree, std::move(left), depth + 1);
    const auto r = grow(tree, std::move(right), depth + 1);
    auto& node = tree.nodes[index];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  SplitChoice best_split(const std::vector<std::size_t>& samples) {
    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    const auto features = rng_.sample_without_replacement(data_.dim(), mtry_);
    const std::size_t n = samples.size();
    std::vector<std::pair<double, std::size_t>> column(n);
    const auto total = counts(samples);
    std::vector<double> left(classes_), right(classes_);

    for (auto f : features) {
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = {data_.x(samples[i], f), data_.labels[samples[i]]};
      }
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = total;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left[column[i].second] += 1.0;
        right[column[i].second] -= 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < hp_.min_leaf || nr < hp_.min_leaf) continue;
        const double impurity =
            (static_cast<double>(nl) * gini_impurity(left) +
             static_cast<double>(nr) * gini_impurity(right)) /
            static_cast<double>(n);
        if (impurity < best.impurity) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          best.impurity = impurity;
        }
      }
    }
    return best;
  }

  const FeatureMatrix& data_;
  std::size_t classes_;
  const Hyperparameters& hp_;
  Rng& rng_;
  std::size_t mtry_ = 1;
};

}  // namespace

std::vector<double> tree_predict(const Tree& tree, std::span<const double> x) {
  std::uint32_t i = 0;
  while (tree.nodes[i].feature >= 0) {
    const auto& node = tree.nodes[i];
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[i].distribution;
}

ClassifierModel fit_forest(const FeatureMatrix& data, const TaskSpec& task,
                           const Hyperparameters& hp, std::uint64_t seed) {
  task.validate();
  hp.validate();
  data.validate(task.num_classes());
  require_all_classes(data.labels, task);

  ForestParams forest;
  forest.trees.resize(hp.n_trees);
  // Each tree draws from its own stream, so thread scheduling cannot change
  // the result.
  auto build_tree = [&](std::size_t t) {
    Rng rng(derive_seed(seed, t, "tree"));
    std::vector<std::size_t> bootstrap(data.size());
    for (auto& s : bootstrap) s = rng.index(data.size());
    TreeBuilder builder(data, task.num_classes(), hp, rng);
    forest.trees[t] = builder.build(std::move(bootstrap));
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, hp.n_trees);
  if (workers == 1) {
    for (std::size_t t = 0; t < hp.n_trees; ++t) build_tree(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < hp.n_trees; t += workers) build_tree(t);
      });
    }
  }

  ClassifierModel model;
  model.algorithm = Algorithm::kRandomForest;
  model.task = task;
  model.hyperparameters = hp;
  model.meta.seed = seed;
  model.meta.epochs_run = 0;
  model.input_dim = data.dim();
  model.params = std::move(forest);
  return model;
}

}  // namespace dpacheck::classifiers
