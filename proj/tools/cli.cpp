#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpacheck/balance.hpp"
#include "dpacheck/checker.hpp"
#include "dpacheck/classifiers.hpp"
#include "dpacheck/corpus.hpp"
#include "dpacheck/embedding.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/eval.hpp"
#include "dpacheck/fewshot.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/pipeline.hpp"
#include "dpacheck/preprocess.hpp"
#include "dpacheck/random.hpp"
#include "dpacheck/synthetic.hpp"

namespace dpacheck::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Manifests

class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  // Every option of the subcommand: given values, else defaults.
  void record_config(const CLI::App& sub) {
    for (const auto* opt : sub.get_options()) {
      const auto name = opt->get_name();
      if (name == "--help" || name == "-h" || name.empty()) continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        config_[name] = r.size() == 1 ? ojson(r[0]) : ojson(r);
      } else {
        config_[name] = opt->get_default_str();
      }
    }
  }
  void input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path}, {"digest", file_digest(path)}};
  }
  void output(const std::string& role, const std::string& path) {
    outputs_[role] = {{"path", path}, {"digest", file_digest(path)}};
  }
  ojson& extra() { return extra_; }

  std::string dump() const {
    ojson j;
    j["command"] = command_;
    j["tool_version"] = std::string(checker::tool_version());
    j["seed"] = seed_;
    j["config"] = config_;
    j["config_digest"] = hash_hex(fnv1a64(config_.dump()));
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    if (!extra_.is_null()) j["details"] = extra_;
    return j.dump(2) + "\n";
  }

  void write(const std::string& path) const { write_text(path, dump()); }

  static void write_text(const std::string& path, const std::string& text) {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  ojson config_ = ojson::object();
  ojson inputs_ = ojson::object();
  ojson outputs_ = ojson::object();
  ojson extra_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

balance::Dataset load_dataset(const std::string& path, const corpus::ProvisionCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  return balance::read_dataset(in, catalog, path);
}

std::string dataset_text(const balance::Dataset& data) {
  std::ostringstream out;
  balance::write_dataset(data, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ProviderOptions {
  std::string store;
  std::string endpoint;
  std::string aliases;
  bool no_fallback = false;

  void add(CLI::App* sub) {
    sub->add_option("--store", store, "Embedding store file")->check(CLI::ExistingFile);
    sub->add_option("--endpoint", endpoint, "HTTP embedding provider URL (overrides --store)")
        ->envname("DPACHECK_EMBED_ENDPOINT");
    sub->add_option("--aliases", aliases, "Party alias table")->check(CLI::ExistingFile);
    sub->add_flag("--no-fallback", no_fallback,
                  "Fail on sentences missing from the store instead of averaging word vectors");
  }

  std::shared_ptr<const embedding::EmbeddingStore> load_store(Manifest& m) const {
    if (store.empty()) return nullptr;
    m.input("store", store);
    return std::make_shared<const embedding::EmbeddingStore>(embedding::load_store(store));
  }

  pipeline::Featurizer featurizer(Manifest& m) const {
    std::shared_ptr<embedding::EmbeddingProvider> provider;
    if (!endpoint.empty()) {
      provider = std::make_shared<embedding::HttpProvider>(endpoint);
      m.extra()["provider"] = "http";
    } else if (!store.empty()) {
      provider = std::make_shared<embedding::StoreProvider>(load_store(m));
    } else {
      throw ValidationError("an embedding source is required: --store or --endpoint");
    }
    preprocess::AliasTable table;
    if (!aliases.empty()) {
      table = preprocess::load_alias_table(aliases);
      m.input("aliases", aliases);
    }
    return pipeline::Featurizer(provider, std::move(table), !no_fallback);
  }
};

struct HpOptions {
  classifiers::Hyperparameters hp;
  std::string hp_file;

  void add(CLI::App* sub) {
    sub->add_option("--hyperparameters", hp_file, "JSON hyperparameter file (flags win)")
        ->check(CLI::ExistingFile);
    sub->add_option("--batch-size", hp.batch_size)->capture_default_str();
    sub->add_option("--epochs", hp.epochs)->capture_default_str();
    sub->add_option("--lr", hp.learning_rate, "Learning rate")->capture_default_str();
    sub->add_option("--dropout", hp.dropout)->capture_default_str();
    sub->add_option("--l2", hp.l2, "SVM regularization strength")->capture_default_str();
    sub->add_option("--trees", hp.n_trees)->capture_default_str();
    sub->add_option("--max-depth", hp.max_depth)->capture_default_str();
    sub->add_option("--min-leaf", hp.min_leaf)->capture_default_str();
    sub->add_option("--hidden", hp.hidden_sizes, "MLP hidden layer widths")->capture_default_str();
    sub->add_option("--lstm-hidden", hp.lstm_hidden)->capture_default_str();
  }

  // File values first, then any flag given on the command line.
  classifiers::Hyperparameters resolve(const CLI::App* sub, Manifest& m) const {
    if (hp_file.empty()) {
      hp.validate();
      return hp;
    }
    m.input("hyperparameters", hp_file);
    auto out = classifiers::Hyperparameters::from_json(read_file(hp_file));
    const auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };
    if (given("--batch-size")) out.batch_size = hp.batch_size;
    if (given("--epochs")) out.epochs = hp.epochs;
    if (given("--lr")) out.learning_rate = hp.learning_rate;
    if (given("--dropout")) out.dropout = hp.dropout;
    if (given("--l2")) out.l2 = hp.l2;
    if (given("--trees")) out.n_trees = hp.n_trees;
    if (given("--max-depth")) out.max_depth = hp.max_depth;
    if (given("--min-leaf")) out.min_leaf = hp.min_leaf;
    if (given("--hidden")) out.hidden_sizes = hp.hidden_sizes;
    if (given("--lstm-hidden")) out.lstm_hidden = hp.lstm_hidden;
    out.validate();
    return out;
  }
};

struct AugmentOptions {
  std::vector<std::string> lexicons;
  std::string mt_table;
  std::string mt_endpoint;
  bool mt_identity = false;
  std::vector<std::string> pivots = {"fr", "de"};

  void add(CLI::App* sub) {
    sub->add_option("--lexicon", lexicons, "Synonym lexicon (repeatable)")->check(CLI::ExistingFile);
    sub->add_option("--mt-table", mt_table, "Word table for the stub translation client")
        ->check(CLI::ExistingFile);
    sub->add_option("--mt-endpoint", mt_endpoint, "HTTP translation service URL");
    sub->add_flag("--mt-identity", mt_identity, "Identity translation client");
    sub->add_option("--pivot", pivots, "Back-translation pivot languages")->capture_default_str();
  }

  balance::Resources resources(std::shared_ptr<const embedding::EmbeddingStore> store,
                               Manifest& m) const {
    balance::Resources r;
    for (std::size_t i = 0; i < lexicons.size(); ++i) {
      r.lexicons.push_back(balance::load_lexicon(lexicons[i]));
      m.input("lexicon" + std::to_string(i + 1), lexicons[i]);
    }
    r.store = std::move(store);
    if (!mt_endpoint.empty()) {
      r.mt = std::make_shared<balance::HttpMtClient>(mt_endpoint);
    } else if (!mt_table.empty()) {
      m.input("mt_table", mt_table);
      std::map<std::string, std::string> table;
      std::istringstream in(read_file(mt_table));
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(mt_table, line_no, "expected word<TAB>replacement");
        table[line.substr(0, tab)] = line.substr(tab + 1);
      }
      r.mt = std::make_shared<balance::TableMtClient>("en", std::move(table));
    } else if (mt_identity) {
      r.mt = std::make_shared<balance::IdentityMtClient>();
    }
    r.pivots = pivots;
    return r;
  }
};

// "multiclass" or "binary:PO3".
classifiers::TaskSpec parse_task(const std::string& text, const corpus::ProvisionCatalog& catalog) {
  if (text == "multiclass") return classifiers::TaskSpec::multiclass(catalog);
  if (text.rfind("binary:", 0) == 0) {
    const auto id = text.substr(7);
    return classifiers::TaskSpec::binary(catalog.at(catalog.require(id)).id);
  }
  throw ValidationError("task must be 'multiclass' or 'binary:<provision>', got '" + text + "'");
}

std::string with_suffix(const std::string& path, const std::string& suffix) { return path + suffix; }

// A DPA from a plain-text file or a JSONL file of sentence records.
corpus::Dpa load_dpa(const std::string& path, std::string dpa_id,
                     const corpus::ProvisionCatalog& catalog) {
  if (dpa_id.empty()) dpa_id = fs::path(path).stem().string();
  if (fs::path(path).extension() != ".jsonl") return pipeline::dpa_from_text(dpa_id, read_file(path));
  const auto data = load_dataset(path, catalog);
  std::set<std::string> ids;
  for (const auto& e : data) ids.insert(e.sentence.dpa_id);
  const std::string wanted = ids.size() == 1 ? *ids.begin() : dpa_id;
  corpus::Dpa dpa{wanted, {}};
  for (const auto& e : data) {
    if (e.sentence.dpa_id == wanted) dpa.sentences.push_back(e.sentence);
  }
  if (dpa.sentences.empty()) throw NotFoundError("no sentences for DPA " + wanted + " in " + path);
  std::sort(dpa.sentences.begin(), dpa.sentences.end(),
            [](const auto& a, const auto& b) { return a.sentence_index < b.sentence_index; });
  return dpa;
}

std::vector<const classifiers::ClassifierModel*> models_for(
    const std::vector<classifiers::ClassifierModel>& models, const std::string& task) {
  return pipeline::select_models(models, pipeline::parse_formulation(task));
}

void print_metrics(std::ostream& out, const char* title, const eval::MetricsSummary& m) {
  out << title << ": micro P " << m.micro.precision << " R " << m.micro.recall << " F"
      << m.beta << " " << m.micro.f_beta << "; macro P " << m.macro.precision << " R "
      << m.macro.recall << " F" << m.beta << " " << m.macro.f_beta << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Completeness checking of data processing agreements", "dpacheck"};
  app.set_version_flag("--version", std::string(checker::tool_version()));
  app.set_config("--config", "", "TOML or INI config file; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string catalog_path;
  const auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };
  const auto add_catalog = [&](CLI::App* sub) {
    sub->add_option("--catalog", catalog_path, "Provision catalog (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Split raw text into sentences and normalize party names");
  std::string pre_text, pre_data, pre_out, pre_dpa_id, pre_candidates;
  std::string pre_aliases, pre_audit;
  bool pre_review = false;
  {
    auto* g = pre->add_option_group("input");
    g->add_option("--text", pre_text, "Raw DPA text")->check(CLI::ExistingFile);
    g->add_option("--data", pre_data, "Ground-truth JSONL to normalize")->check(CLI::ExistingFile);
    g->require_option(1);
    pre->add_option("--dpa-id", pre_dpa_id, "DPA id for --text (default: file stem)");
    pre->add_option("--aliases", pre_aliases, "Party alias table")->check(CLI::ExistingFile);
    pre->add_option("--catalog", catalog_path, "Provision catalog, needed with --data")
        ->check(CLI::ExistingFile);
    pre->add_option("--out", pre_out, "Output JSONL")->required();
    pre->add_option("--candidates", pre_candidates, "Write alias candidates (TSV) here");
    pre->add_flag("--review", pre_review, "Print unmatched capitalized spans as alias candidates");
    pre->add_option("--audit", pre_audit, "Write the applied replacements (JSONL) here");
  }

  // split
  auto* split = app.add_subcommand("split", "70/30 DPA-level split with a validation cut");
  std::string split_data, split_out;
  double split_dev = 0.7, split_val = 0.2;
  add_catalog(split);
  add_seed(split);
  split->add_option("--data", split_data, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
  split->add_option("--dev-fraction", split_dev)->capture_default_str();
  split->add_option("--val-fraction", split_val, "Share of dev kept for validation")->capture_default_str();
  split->add_option("--out", split_out, "Output directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus counts per provision");
  std::string stats_data;
  add_catalog(stats);
  stats->add_option("--data", stats_data, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);

  // balance and augment share the variant machinery
  std::string var_data, var_out, var_task = "multiclass", var_method;
  AugmentOptions aug_opts;
  std::string aug_store;
  auto* bal = app.add_subcommand("balance", "Random under/oversampling (RU, RO, RUOS)");
  add_catalog(bal);
  add_seed(bal);
  bal->add_option("--data", var_data, "Training JSONL")->required()->check(CLI::ExistingFile);
  bal->add_option("--task", var_task, "multiclass or binary:<provision>")->capture_default_str();
  bal->add_option("--method", var_method, "RU, RO or RUOS")
      ->required()
      ->check(CLI::IsMember({"RU", "RO", "RUOS"}));
  bal->add_option("--out", var_out, "Output dataset JSONL")->required();

  auto* aug = app.add_subcommand("augment", "Build a training-set variant from a recipe");
  add_catalog(aug);
  add_seed(aug);
  aug->add_option("--data", var_data, "Training JSONL")->required()->check(CLI::ExistingFile);
  aug->add_option("--task", var_task, "multiclass or binary:<provision>")->capture_default_str();
  aug->add_option("--recipe", var_method, "Recipe name (see --list-recipes)");
  // Runs during parsing so the required options do not apply.
  aug->add_flag_callback(
      "--list-recipes",
      [&out] {
        for (const auto& r : balance::builtin_recipes()) {
          out << r.name << '\t';
          for (std::size_t i = 0; i < r.steps.size(); ++i) out << (i ? ", " : "") << r.steps[i].describe();
          out << '\n';
        }
        throw CLI::Success();
      },
      "Print the built-in recipes and exit");
  aug->add_option("--store", aug_store, "Embedding store with a vocabulary section (ER)")
      ->check(CLI::ExistingFile);
  aug_opts.add(aug);
  aug->add_option("--out", var_out, "Output dataset JSONL");

  // train
  auto* train = app.add_subcommand("train", "Train the binary and/or multiclass models");
  std::string train_data, train_out, train_task = "both", train_algorithm = "logreg", train_recipe;
  ProviderOptions train_provider;
  HpOptions train_hp;
  AugmentOptions train_aug;
  add_catalog(train);
  add_seed(train);
  train->add_option("--data", train_data, "Training JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--task", train_task, "binary, multiclass or both")
      ->check(CLI::IsMember({"binary", "multiclass", "both"}))
      ->capture_default_str();
  train->add_option("--algorithm", train_algorithm, "logreg, linear_svm, random_forest, mlp, bilstm")
      ->capture_default_str();
  train->add_option("--recipe", train_recipe, "Balance each task's data with this recipe first");
  train->add_option("--out", train_out, "Model file")->required();
  train_provider.add(train);
  train_hp.add(train);
  train_aug.add(train);

  // grid
  auto* grid = app.add_subcommand("grid", "Grid search scored by validation F2");
  std::string grid_train, grid_val, grid_out, grid_task = "multiclass", grid_algorithm = "logreg";
  std::vector<std::size_t> grid_batches;
  std::vector<int> grid_epochs;
  std::vector<double> grid_lrs;
  ProviderOptions grid_provider;
  HpOptions grid_hp;
  add_catalog(grid);
  add_seed(grid);
  grid->add_option("--train", grid_train, "Training JSONL")->required()->check(CLI::ExistingFile);
  grid->add_option("--val", grid_val, "Validation JSONL")->required()->check(CLI::ExistingFile);
  grid->add_option("--task", grid_task, "multiclass or binary:<provision>")->capture_default_str();
  grid->add_option("--algorithm", grid_algorithm)->capture_default_str();
  grid->add_option("--batch-sizes", grid_batches, "Override the batch size axis");
  grid->add_option("--epoch-values", grid_epochs, "Override the epochs axis");
  grid->add_option("--lr-values", grid_lrs, "Override the learning-rate axis");
  grid->add_option("--out", grid_out, "Leaderboard TSV")->required();
  grid_provider.add(grid);
  grid_hp.add(grid);

  // fewshot
  auto* few = app.add_subcommand("fewshot", "Contrastive projection plus logistic head");
  std::string few_data, few_out, few_task = "both", few_shots = "30%";
  fewshot::ContrastiveOptions few_opts;
  ProviderOptions few_provider;
  HpOptions few_hp;
  add_catalog(few);
  add_seed(few);
  few->add_option("--data", few_data, "Training JSONL")->required()->check(CLI::ExistingFile);
  few->add_option("--task", few_task, "binary, multiclass or both")
      ->check(CLI::IsMember({"binary", "multiclass", "both"}))
      ->capture_default_str();
  few->add_option("--shots", few_shots, "Training share such as 30% or examples per class such as 10")
      ->capture_default_str();
  few->add_option("--pairs", few_opts.pairs_per_example, "Pairs per example and kind")->capture_default_str();
  few->add_option("--contrastive-epochs", few_opts.epochs)->capture_default_str();
  few->add_option("--contrastive-lr", few_opts.learning_rate)->capture_default_str();
  few->add_option("--out", few_out, "Model file")->required();
  few_provider.add(few);
  few_hp.add(few);

  // predict / check / evaluate / bench share model inputs
  std::string model_path, dpa_path, dpa_id, task_mode = "multiclass", out_path;
  ProviderOptions run_provider;
  std::optional<double> floor, threshold;
  const auto add_model_inputs = [&](CLI::App* sub) {
    add_catalog(sub);
    sub->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    sub->add_option("--task", task_mode, "binary or multiclass")
        ->check(CLI::IsMember({"binary", "multiclass"}))
        ->capture_default_str();
    sub->add_option("--threshold", threshold, "Binary decision threshold (default 0.5, or 0 for SVM)");
    run_provider.add(sub);
  };
  auto* pred = app.add_subcommand("predict", "Sentence-level predictions for one DPA");
  add_model_inputs(pred);
  pred->add_option("--dpa", dpa_path, "DPA text or JSONL")->required()->check(CLI::ExistingFile);
  pred->add_option("--dpa-id", dpa_id);
  pred->add_option("--out", out_path, "Predictions JSONL")->required();

  auto* chk = app.add_subcommand("check", "Completeness report for one DPA");
  std::string report_format = "human";
  add_model_inputs(chk);
  chk->add_option("--dpa", dpa_path, "DPA text or JSONL")->required()->check(CLI::ExistingFile);
  chk->add_option("--dpa-id", dpa_id);
  chk->add_option("--format", report_format)->check(CLI::IsMember({"human", "json"}))->capture_default_str();
  chk->add_option("--confidence-floor", floor, "Ignore predictions scoring below this");
  bool show_normalized = false;
  chk->add_flag("--normalized-text", show_normalized, "Quote normalized rather than original sentences");
  chk->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* evl = app.add_subcommand("evaluate", "DPA-level and sentence-level metrics on a labeled corpus");
  std::string eval_data;
  double beta = 2.0;
  add_model_inputs(evl);
  evl->add_option("--data", eval_data, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
  evl->add_option("--beta", beta)->capture_default_str();
  evl->add_option("--out", out_path, "Metrics TSV (a .json summary is written next to it)");

  auto* kap = app.add_subcommand("kappa", "Cohen's kappa between two label files");
  std::string kappa_a, kappa_b;
  kap->add_option("a", kappa_a, "Labels of rater A, one per line")->required()->check(CLI::ExistingFile);
  kap->add_option("b", kappa_b, "Labels of rater B, one per line")->required()->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "Time the inference path (and optionally training)");
  std::size_t repeat = 1;
  std::string bench_train;
  add_model_inputs(bench);
  bench->add_option("--dpa", dpa_path, "DPA text or JSONL")->required()->check(CLI::ExistingFile);
  bench->add_option("--repeat", repeat)->capture_default_str();
  bench->add_option("--train-data", bench_train, "Also time training on this JSONL")
      ->check(CLI::ExistingFile);
  bench->add_option("--out", out_path, "Benchmark TSV");

  auto* vstore = app.add_subcommand("validate-store", "Check an embedding store file");
  std::string vstore_path;
  vstore->add_option("store", vstore_path, "Store file")->required()->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Write the synthetic demo corpus");
  synthetic::SyntheticSpec synth_spec;
  std::string synth_out;
  synth->add_option("--seed", synth_spec.seed)->capture_default_str();
  synth->add_option("--dpas", synth_spec.n_dpas)->capture_default_str();
  synth->add_option("--other-per-dpa", synth_spec.other_per_dpa)->capture_default_str();
  synth->add_option("--dim", synth_spec.dim)->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::Success&) {
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    const auto catalog = [&] { return corpus::load_catalog(catalog_path); };

    if (pre->parsed()) {
      Manifest m("preprocess", 0);
      m.record_config(*pre);
      preprocess::AliasTable aliases;
      if (!pre_aliases.empty()) {
        aliases = preprocess::load_alias_table(pre_aliases);
        m.input("aliases", pre_aliases);
      }
      std::vector<std::string> normalized;
      std::size_t applied = 0;
      std::ostringstream body, audit;
      const auto track = [&](const corpus::Sentence& s, const preprocess::NormalizedText& n) {
        applied += n.applied.size();
        for (const auto& a : n.applied) {
          audit << nlohmann::json{{"dpa_id", s.dpa_id}, {"sentence_index", s.sentence_index},
                                  {"pattern", a.pattern}, {"matched", a.matched},
                                  {"replacement", a.replacement}, {"begin", a.begin}, {"end", a.end}}
                       .dump()
                << '\n';
        }
      };
      if (!pre_text.empty()) {
        m.input("text", pre_text);
        const auto dpa = pipeline::dpa_from_text(
            pre_dpa_id.empty() ? fs::path(pre_text).stem().string() : pre_dpa_id, read_file(pre_text));
        for (const auto& s : dpa.sentences) {
          auto n = preprocess::normalize(s.text, aliases);
          track(s, n);
          nlohmann::json rec = {{"dpa_id", s.dpa_id}, {"sentence_index", s.sentence_index},
                                {"text", n.text}, {"labels", nlohmann::json::array()}};
          body << rec.dump() << '\n';
          normalized.push_back(std::move(n.text));
        }
      } else {
        if (catalog_path.empty()) throw ValidationError("--data needs --catalog");
        m.input("data", pre_data);
        auto corpus = corpus::load_ground_truth(pre_data, catalog());
        for (auto& d : corpus.dpas) {
          for (auto& s : d.sentences) {
            auto n = preprocess::normalize(s.text, aliases);
            track(s, n);
            s.text = n.text;
            normalized.push_back(std::move(n.text));
          }
        }
        corpus::write_ground_truth(corpus, body);
      }
      Manifest::write_text(pre_out, body.str());
      m.output("sentences", pre_out);
      m.extra() = {{"sentences", normalized.size()}, {"aliases_applied", applied}};
      if (!pre_audit.empty()) {
        Manifest::write_text(pre_audit, audit.str());
        m.output("audit", pre_audit);
      }
      if (!pre_candidates.empty() || pre_review) {
        std::ostringstream c;
        for (const auto& [cand, n] : preprocess::review_candidates(normalized)) c << cand << '\t' << n << '\n';
        if (pre_review) out << c.str();
        if (!pre_candidates.empty()) {
          Manifest::write_text(pre_candidates, c.str());
          m.output("candidates", pre_candidates);
        }
      }
      m.write(with_suffix(pre_out, ".manifest.json"));
      out << normalized.size() << " sentences, " << applied << " party names normalized\n";
      return 0;
    }

    if (split->parsed()) {
      Manifest m("split", seed);
      m.record_config(*split);
      m.input("catalog", catalog_path);
      m.input("data", split_data);
      const auto corpus = corpus::load_ground_truth(split_data, catalog());
      const auto parts = corpus::split_dpas(corpus, {seed, split_dev, split_val});
      fs::create_directories(split_out);
      ojson ids;
      const std::vector<std::pair<std::string, const corpus::LabeledCorpus*>> named = {
          {"dev", &parts.dev}, {"eval", &parts.eval}, {"train", &parts.train}, {"val", &parts.val}};
      for (const auto& [name, part] : named) {
        const auto path = (fs::path(split_out) / (name + ".jsonl")).string();
        corpus::save_ground_truth(*part, path);
        m.output(name, path);
        ids[name] = ojson::array();
        for (const auto& d : part->dpas) ids[name].push_back(d.dpa_id);
      }
      m.extra() = ids;
      m.write((fs::path(split_out) / "manifest.json").string());
      out << "dev " << parts.dev.dpas.size() << " (train " << parts.train.dpas.size() << ", val "
          << parts.val.dpas.size() << "), eval " << parts.eval.dpas.size() << " DPAs\n";
      return 0;
    }

    if (stats->parsed()) {
      out << corpus::render_stats_tsv(corpus::corpus_stats(corpus::load_ground_truth(stats_data, catalog())));
      return 0;
    }

    if (bal->parsed() || aug->parsed()) {
      if (var_method.empty()) throw ValidationError("--recipe is required");
      if (var_out.empty()) throw ValidationError("--out is required");
      auto* sub = bal->parsed() ? bal : aug;
      Manifest m(sub->get_name(), seed);
      m.record_config(*sub);
      m.input("catalog", catalog_path);
      m.input("data", var_data);
      const auto cat = catalog();
      const auto task = parse_task(var_task, cat);
      const auto data = load_dataset(var_data, cat);
      std::shared_ptr<const embedding::EmbeddingStore> store;
      if (!aug_store.empty()) {
        store = std::make_shared<const embedding::EmbeddingStore>(embedding::load_store(aug_store));
        m.input("store", aug_store);
      }
      const auto resources = aug_opts.resources(store, m);
      const auto result = balance::build_variant(data, task, balance::find_recipe(var_method), seed, resources);
      Manifest::write_text(var_out, dataset_text(result.dataset));
      m.output("dataset", var_out);
      m.extra() = ojson::parse(result.manifest.to_json());
      m.write(with_suffix(var_out, ".manifest.json"));
      out << result.manifest.recipe << ": " << data.size() << " -> " << result.dataset.size() << " examples\n";
      return 0;
    }

    if (train->parsed()) {
      Manifest m("train", seed);
      m.record_config(*train);
      m.input("catalog", catalog_path);
      m.input("data", train_data);
      const auto cat = catalog();
      const auto data = load_dataset(train_data, cat);
      auto features = train_provider.featurizer(m);
      pipeline::TrainPlan plan;
      plan.algorithm = classifiers::parse_algorithm(train_algorithm);
      plan.hp = train_hp.resolve(train, m);
      plan.seed = seed;
      plan.binary = train_task != "multiclass";
      plan.multiclass = train_task != "binary";
      if (!train_recipe.empty()) {
        plan.recipe = balance::find_recipe(train_recipe);
        plan.resources = train_aug.resources(train_provider.load_store(m), m);
      }
      const auto models = pipeline::train_all(data, cat, plan, features);
      classifiers::save_models(models, train_out);
      m.output("models", train_out);
      ojson summary = ojson::array();
      for (const auto& model : models) {
        summary.push_back({{"task", model.task.is_binary() ? "binary:" + model.task.provision() : "multiclass"},
                           {"epochs_run", model.meta.epochs_run}});
      }
      m.extra() = {{"models", summary}, {"word_mean_fallbacks", features.fallbacks()}};
      m.write(with_suffix(train_out, ".manifest.json"));
      out << "trained " << models.size() << " " << train_algorithm << " model(s)\n";
      return 0;
    }

    if (grid->parsed()) {
      Manifest m("grid", seed);
      m.record_config(*grid);
      m.input("catalog", catalog_path);
      m.input("train", grid_train);
      m.input("val", grid_val);
      const auto cat = catalog();
      const auto task = parse_task(grid_task, cat);
      auto features = grid_provider.featurizer(m);
      const auto algorithm = classifiers::parse_algorithm(grid_algorithm);
      const bool seq = algorithm == classifiers::Algorithm::kBiLstm;
      const auto tr = pipeline::training_set(load_dataset(grid_train, cat), task, features, seq);
      const auto va = pipeline::training_set(load_dataset(grid_val, cat), task, features, seq);
      auto g = classifiers::Grid::standard();
      if (!grid_batches.empty()) g.batch_sizes = grid_batches;
      if (!grid_epochs.empty()) g.epochs = grid_epochs;
      if (!grid_lrs.empty()) g.learning_rates = grid_lrs;
      const auto result = classifiers::grid_search(algorithm, g, grid_hp.resolve(grid, m), tr, va, task, seed);
      Manifest::write_text(grid_out, classifiers::render_leaderboard_tsv(result));
      m.output("leaderboard", grid_out);
      m.extra() = {{"best_index", result.best_index}, {"best", ojson::parse(result.best.to_json())}};
      m.write(with_suffix(grid_out, ".manifest.json"));
      out << "best cell " << result.best_index << " with F2 " << result.leaderboard[result.best_index].score << "\n";
      return 0;
    }

    if (few->parsed()) {
      Manifest m("fewshot", seed);
      m.record_config(*few);
      m.input("catalog", catalog_path);
      m.input("data", few_data);
      const auto cat = catalog();
      const auto data = load_dataset(few_data, cat);
      auto features = few_provider.featurizer(m);
      fewshot::ShotSpec shots;
      if (!few_shots.empty() && few_shots.back() == '%') {
        shots = fewshot::ShotSpec::from_fraction(std::stod(few_shots.substr(0, few_shots.size() - 1)) / 100.0);
      } else {
        shots = fewshot::ShotSpec::from_count(std::stoul(few_shots));
      }
      const auto hp = few_hp.resolve(few, m);
      std::vector<classifiers::TaskSpec> tasks;
      if (few_task != "multiclass") {
        for (const auto& p : cat.provisions()) tasks.push_back(classifiers::TaskSpec::binary(p.id));
      }
      if (few_task != "binary") tasks.push_back(classifiers::TaskSpec::multiclass(cat));
      std::vector<classifiers::ClassifierModel> models;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto set = pipeline::training_set(data, tasks[i], features, false);
        models.push_back(fewshot::fit_fewshot(set.flat, tasks[i], hp, few_opts, shots,
                                              derive_seed(seed, i, "fewshot")));
      }
      classifiers::save_models(models, few_out);
      m.output("models", few_out);
      m.extra() = {{"shots", shots.describe()}, {"models", models.size()}};
      m.write(with_suffix(few_out, ".manifest.json"));
      out << "trained " << models.size() << " few-shot model(s) on " << shots.describe() << " shots\n";
      return 0;
    }

    if (pred->parsed() || chk->parsed()) {
      auto* sub = pred->parsed() ? pred : chk;
      Manifest m(sub->get_name(), 0);
      m.record_config(*sub);
      m.input("catalog", catalog_path);
      m.input("model", model_path);
      m.input("dpa", dpa_path);
      const auto cat = catalog();
      const auto models = classifiers::load_models(model_path);
      const auto selected = models_for(models, task_mode);
      auto features = run_provider.featurizer(m);
      auto dpa = load_dpa(dpa_path, dpa_id, cat);
      if (chk->parsed() && show_normalized) {
        for (auto& s : dpa.sentences) s.text = features.normalized(s.text);
      }
      if (pred->parsed()) {
        std::ostringstream body;
        for (const auto& p : pipeline::predict_dpa(selected, dpa, features, threshold)) {
          nlohmann::json labels = nlohmann::json::array();
          for (const auto& l : p.predicted_labels) labels.push_back(l.str());
          body << nlohmann::json{{"dpa_id", p.dpa_id}, {"sentence_index", p.sentence_index},
                                 {"text", p.text}, {"predicted", labels}, {"scores", p.scores}}
                      .dump()
               << '\n';
        }
        Manifest::write_text(out_path, body.str());
        m.output("predictions", out_path);
        m.write(with_suffix(out_path, ".manifest.json"));
        return 0;
      }
      pipeline::CheckOptions options;
      options.threshold = threshold;
      options.confidence_floor = floor;
      options.audit = {std::string(checker::tool_version()), file_digest(model_path), cat.digest()};
      const auto report = pipeline::check_dpa(selected, dpa, cat, features, options);
      const auto text = checker::render_report(
          report, report_format == "json" ? checker::ReportFormat::kMachine : checker::ReportFormat::kHuman);
      if (out_path.empty()) {
        out << text;
      } else {
        Manifest::write_text(out_path, text);
        m.output("report", out_path);
        m.write(with_suffix(out_path, ".manifest.json"));
      }
      return 0;
    }

    if (evl->parsed()) {
      Manifest m("evaluate", 0);
      m.record_config(*evl);
      m.input("catalog", catalog_path);
      m.input("model", model_path);
      m.input("data", eval_data);
      const auto cat = catalog();
      const auto models = classifiers::load_models(model_path);
      auto features = run_provider.featurizer(m);
      const auto corpus = corpus::load_ground_truth(eval_data, cat);
      const auto result = pipeline::evaluate(models_for(models, task_mode), corpus, features, beta);
      print_metrics(out, "DPA level", result.dpa_level);
      print_metrics(out, "sentence level", result.sentence_level);
      if (!out_path.empty()) {
        Manifest::write_text(out_path, eval::render_metrics_tsv(result.dpa_level));
        const auto json_path = (fs::path(out_path).replace_extension(".json")).string();
        ojson summary = {{"dpa_level", ojson::parse(eval::render_metrics_json(result.dpa_level))},
                         {"sentence_level", ojson::parse(eval::render_metrics_json(result.sentence_level))}};
        Manifest::write_text(json_path, summary.dump(2) + "\n");
        m.output("metrics", out_path);
        m.output("summary", json_path);
        m.write(with_suffix(out_path, ".manifest.json"));
      }
      return 0;
    }

    if (kap->parsed()) {
      const auto lines = [](const std::string& path) {
        std::vector<std::string> v;
        std::istringstream in(read_file(path));
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) v.push_back(line);
        }
        return v;
      };
      const auto a = lines(kappa_a);
      const auto b = lines(kappa_b);
      const double k = eval::cohen_kappa(a, b);
      out << "kappa\t" << k << "\t" << eval::kappa_band(k) << "\n";
      return 0;
    }

    if (bench->parsed()) {
      Manifest m("bench", 0);
      const auto cat = catalog();
      const auto models = classifiers::load_models(model_path);
      const auto selected = models_for(models, task_mode);
      auto features = run_provider.featurizer(m);
      const bool from_text = fs::path(dpa_path).extension() != ".jsonl";
      const std::string raw = from_text ? read_file(dpa_path) : std::string();
      std::vector<eval::Stage> stages;
      if (!bench_train.empty()) {
        stages.push_back({"train", "developer", [&] {
                            const auto data = load_dataset(bench_train, cat);
                            pipeline::TrainPlan plan;
                            plan.algorithm = selected.front()->algorithm;
                            plan.hp = selected.front()->hyperparameters;
                            plan.binary = task_mode == "binary";
                            plan.multiclass = !plan.binary;
                            pipeline::train_all(data, cat, plan, features);
                            return data.size();
                          }});
      }
      corpus::Dpa dpa;
      std::vector<checker::SentencePrediction> predictions;
      checker::CompletenessReport report;
      for (std::size_t r = 0; r < repeat; ++r) {
        const auto tag = repeat > 1 ? "#" + std::to_string(r + 1) : std::string();
        stages.push_back({"preprocess" + tag, "user", [&] {
                            dpa = from_text ? pipeline::dpa_from_text("bench", raw) : load_dpa(dpa_path, "", cat);
                            for (const auto& s : dpa.sentences) (void)features.normalized(s.text);
                            return dpa.sentences.size();
                          }});
        stages.push_back({"embed-lookup" + tag, "user", [&] {
                            for (const auto& s : dpa.sentences) (void)features.vector(s.text);
                            return dpa.sentences.size();
                          }});
        stages.push_back({"predict" + tag, "user", [&] {
                            predictions = pipeline::predict_dpa(selected, dpa, features);
                            return predictions.size();
                          }});
        stages.push_back({"check" + tag, "user", [&] {
                            report = checker::check_completeness(dpa.dpa_id, checker::aggregate(predictions, cat), cat);
                            return report.provisions.size();
                          }});
        stages.push_back({"render" + tag, "user", [&] {
                            return checker::render_report(report, checker::ReportFormat::kHuman).size();
                          }});
      }
      const auto table = eval::benchmark_runtime(stages);
      const auto tsv = eval::render_benchmark_tsv(table);
      out << tsv;
      if (!out_path.empty()) Manifest::write_text(out_path, tsv);
      return 0;
    }

    if (vstore->parsed()) {
      const auto report = embedding::validate_store(vstore_path);
      if (!report.valid) {
        err << "invalid: " << report.message << "\n";
        return 2;
      }
      out << "valid: dim " << report.dim << ", " << report.count << " vectors, "
          << report.token_sequences << " token sequences, " << report.vocabulary_size
          << " vocabulary words, model " << report.model_id << "\n";
      return 0;
    }

    if (synth->parsed()) {
      const auto bundle = synthetic::generate(synth_spec);
      synthetic::write_bundle(bundle, synth_out);
      out << "wrote " << bundle.corpus.dpas.size() << " DPAs, " << bundle.corpus.sentence_count()
          << " sentences to " << synth_out << "\n";
      return 0;
    }
  } catch (const ServiceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace dpacheck::cli
