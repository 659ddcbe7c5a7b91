#include <sstream>

#include "dpacheck/classifiers.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/eval.hpp"

namespace dpacheck::classifiers {

Grid Grid::standard() {
  Grid g;
  g.batch_sizes = {32, 64, 128};
  g.epochs = {25, 50, 100};
  g.learning_rates = {0.01, 0.0001};
  return g;
}

std::vector<Hyperparameters> Grid::enumerate(const Hyperparameters& base) const {
  std::vector<Hyperparameters> cells{base};
  // Expands the current cell list along one axis; later axes vary faster.
  auto expand = [&cells](const auto& values, auto assign) {
    if (values.empty()) return;
    std::vector<Hyperparameters> next;
    for (const auto& cell : cells) {
      for (const auto& v : values) {
        Hyperparameters hp = cell;
        assign(hp, v);
        next.push_back(std::move(hp));
      }
    }
    cells = std::move(next);
  };
  expand(batch_sizes, [](Hyperparameters& hp, std::size_t v) { hp.batch_size = v; });
  expand(epochs, [](Hyperparameters& hp, int v) { hp.epochs = v; });
  expand(learning_rates, [](Hyperparameters& hp, double v) { hp.learning_rate = v; });
  expand(n_trees, [](Hyperparameters& hp, std::size_t v) { hp.n_trees = v; });
  expand(max_depths, [](Hyperparameters& hp, std::size_t v) { hp.max_depth = v; });
  expand(hidden_sizes,
         [](Hyperparameters& hp, const std::vector<std::size_t>& v) { hp.hidden_sizes = v; });
  expand(lstm_hidden, [](Hyperparameters& hp, std::size_t v) { hp.lstm_hidden = v; });
  return cells;
}

double selection_f2(const ClassifierModel& model, const TrainingSet& data) {
  const auto& labels = data.flat.labels;
  std::vector<std::size_t> predicted(labels.size());
  const bool sequences = model.algorithm == Algorithm::kBiLstm && data.sequences.has_value();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto scores = sequences ? predict_scores(model, data.sequences->sequences[i])
                                  : predict_scores(model, data.flat.x.row(i));
    predicted[i] = decide(model, scores);
  }
  const auto counts = eval::class_counts(labels, predicted, model.task.num_classes());
  if (model.task.is_binary()) return eval::metrics_from_counts("", counts[0]).f_beta;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < model.task.other_index(); ++k) {
    const auto row = eval::metrics_from_counts("", counts[k]);
    if (row.f_undefined) continue;
    sum += row.f_beta;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

GridResult grid_search(Algorithm algorithm, const Grid& grid, const Hyperparameters& base,
                       const TrainingSet& train, const TrainingSet& val, const TaskSpec& task,
                       std::uint64_t seed) {
  GridResult result;
  bool have_best = false;
  double best_score = 0.0;
  for (const auto& hp : grid.enumerate(base)) {
    GridCell cell{hp, 0.0, "ok"};
    try {
      const auto model = fit(algorithm, train, task, hp, seed);
      cell.score = selection_f2(model, val);
      if (!have_best || cell.score > best_score) {
        have_best = true;
        best_score = cell.score;
        result.best = hp;
        result.best_index = result.leaderboard.size();
      }
    } catch (const DataError& e) {
      cell.status = e.what();
    }
    result.leaderboard.push_back(std::move(cell));
  }
  if (!have_best) throw ValidationError("grid search: every configuration failed to fit");
  return result;
}

std::string render_leaderboard_tsv(const GridResult& result) {
  std::ostringstream out;
  out << "cell\tbest\tbatch_size\tepochs\tlearning_rate\tn_trees\tmax_depth\thidden_sizes\t"
         "lstm_hidden\tf2\tstatus\n";
  for (std::size_t i = 0; i < result.leaderboard.size(); ++i) {
    const auto& c = result.leaderboard[i];
    const auto& hp = c.hyperparameters;
    std::string hidden;
    for (std::size_t j = 0; j < hp.hidden_sizes.size(); ++j) {
      hidden += (j ? "x" : "") + std::to_string(hp.hidden_sizes[j]);
    }
    char score[32];
    std::snprintf(score, sizeof score, "%.6f", c.score);
    out << i << '\t' << (i == result.best_index ? "*" : "") << '\t' << hp.batch_size << '\t'
        << hp.epochs << '\t' << hp.learning_rate << '\t' << hp.n_trees << '\t' << hp.max_depth
        << '\t' << hidden << '\t' << hp.lstm_hidden << '\t' << score << '\t' << c.status << '\n';
  }
  return out.str();
}

}  // namespace dpacheck::classifiers
