// Acceptance run: one PASS/FAIL line per criterion with its wall time.
// Exits non-zero when any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <json.hpp>
#include <sstream>

#include "../common/gradcheck.hpp"
#include "cli.hpp"
#include "dpacheck/balance.hpp"
#include "dpacheck/eval.hpp"
#include "dpacheck/fewshot.hpp"
#include "dpacheck/pipeline.hpp"
#include "dpacheck/synthetic.hpp"

using namespace dpacheck;
using classifiers::Algorithm;
using classifiers::TaskSpec;
namespace fs = std::filesystem;

namespace {

// Collects failed conditions so a criterion can report what went wrong.
struct Check {
  std::vector<std::string> failures;
  void operator()(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<void(Check&)> body;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "dpacheck");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (code != 0) std::cerr << e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- 1

double oracle_f2(double p, double r) { return 5 * p * r / (4 * p + r); }

void f2_oracle(Check& check) {
  for (auto [p, r, want, tol] : {std::tuple{0.751, 0.901, 0.866, 0.002},
                                 std::tuple{0.698, 0.966, 0.897, 0.001}}) {
    // Integer counts with exactly this precision and recall.
    const auto P = static_cast<std::uint64_t>(std::llround(p * 1000));
    const auto R = static_cast<std::uint64_t>(std::llround(r * 1000));
    eval::Counts c;
    c.tp = P * R;
    c.fp = R * (1000 - P);
    c.fn = P * (1000 - R);
    const auto row = eval::metrics_from_counts("x", c);
    check(std::abs(row.f_beta - oracle_f2(p, r)) < 1e-12, "metrics vs oracle at P=" + fmt(p));
    check(std::abs(row.f_beta - want) <= tol, "F2(" + fmt(p) + ", " + fmt(r) + ") = " + fmt(row.f_beta));
  }
}

// ---------------------------------------------------------------- 2

void augmentation_counts(Check& check) {
  const auto pos = synthetic::positive_sentences(2871, 5);
  const auto bundle = synthetic::generate();
  balance::IdentityMtClient mt;
  const auto bt = balance::augment_backtranslate(pos, mt);
  check(bt.dropped == 0 && bt.variants.size() == 5742, "BT " + std::to_string(bt.variants.size()));
  const auto sr = balance::augment_synonym(pos, bundle.lexicons, 5);
  check(sr.dropped == 0 && sr.variants.size() == 5742, "SR " + std::to_string(sr.variants.size()));
  const auto er = balance::augment_embedding(pos, *bundle.store, 3, 5);
  check(er.dropped == 0 && er.variants.size() == 8613, "ER " + std::to_string(er.variants.size()));
  const balance::NoiseOp ops[] = {balance::NoiseOp::kSwap, balance::NoiseOp::kDelete,
                                  balance::NoiseOp::kSubstitute, balance::NoiseOp::kCrop};
  const auto ni = balance::augment_noise(pos, ops, balance::content_vocabulary(pos), 5);
  check(ni.dropped == 0 && ni.variants.size() == 11484, "NI " + std::to_string(ni.variants.size()));
}

// ---------------------------------------------------------------- 3

balance::Dataset with_counts(const std::map<std::string, std::size_t>& counts) {
  balance::Dataset d;
  std::size_t idx = 0;
  for (const auto& [cls, n] : counts) {
    for (std::size_t i = 0; i < n; ++i, ++idx) {
      balance::Example e;
      e.sentence = {"D", idx, cls + " " + std::to_string(i), {}};
      if (cls != "other") e.sentence.gold_labels.push_back(corpus::ProvisionId(cls));
      d.push_back(std::move(e));
    }
  }
  return d;
}

using Profile = std::map<std::string, std::size_t>;

Profile profile(const balance::Dataset& d, const TaskSpec& task) {
  Profile out;
  const auto c = balance::class_counts(d, task);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] > 0) out[task.classes[i]] = c[i];
  }
  return out;
}

corpus::ProvisionCatalog numbered_catalog(int n = 19) {
  std::vector<corpus::Provision> p;
  for (int i = 1; i <= n; ++i) {
    p.push_back({corpus::ProvisionId("PO" + std::to_string(i)), "title", ""});
  }
  return corpus::ProvisionCatalog("acceptance", std::move(p));
}

void resampling(Check& check) {
  const auto task = TaskSpec::multiclass(numbered_catalog());
  const auto ru = profile(balance::random_undersample(
                              with_counts({{"other", 1000}, {"PO6", 200}, {"PO1", 50}}), task, 1),
                          task);
  check(ru == Profile{{"PO1", 50}, {"PO6", 200}, {"other", 200}}, "RU example");
  const auto ro = profile(balance::random_oversample(
                              with_counts({{"other", 1000}, {"PO1", 50}, {"PO2", 30}}), task, 1),
                          task);
  check(ro == Profile{{"PO1", 1000}, {"PO2", 1000}, {"other", 1000}}, "RO example");
  const auto ruos = profile(
      balance::under_oversample(
          with_counts({{"other", 1000}, {"PO6", 200}, {"PO1", 50}, {"PO2", 30}}), task, 1),
      task);
  check(ruos == Profile{{"PO1", 200}, {"PO2", 200}, {"PO6", 200}, {"other", 200}}, "RUOS example");

  Rng rng(99);
  std::size_t bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Profile counts;
    const auto k = 1 + rng.index(5);
    for (std::size_t c = 0; c < k; ++c) {
      counts["PO" + std::to_string(1 + rng.index(19))] = 1 + rng.index(40);
    }
    counts["other"] = 1 + rng.index(120);
    std::size_t minority = 0, majority = 0;
    for (const auto& [cls, n] : counts) {
      majority = std::max(majority, n);
      if (cls != "other") minority = std::max(minority, n);
    }
    Profile want_ru = counts, want_ro = counts, want_ruos = counts;
    want_ru["other"] = std::min(counts["other"], minority);
    const auto level = std::max(minority, want_ru["other"]);
    for (auto& [cls, n] : want_ro) n = majority;
    for (auto& [cls, n] : want_ruos) n = level;
    const auto d = with_counts(counts);
    const auto seed = rng.next();
    bad += profile(balance::random_undersample(d, task, seed), task) != want_ru;
    bad += profile(balance::random_oversample(d, task, seed), task) != want_ro;
    bad += profile(balance::under_oversample(d, task, seed), task) != want_ruos;
  }
  check(bad == 0, std::to_string(bad) + " property mismatches");
}

// ---------------------------------------------------------------- 4

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void gradients(Check& check) {
  using namespace classifiers;
  Rng rng(11);
  double worst_linear = 0, worst_mlp = 0, worst_lstm = 0;
  for (auto kind : {Algorithm::kLogReg, Algorithm::kLinearSvm}) {
    for (bool binary : {true, false}) {
      for (int draw = 0; draw < 20; ++draw) {
        const std::size_t k = binary ? 2 : 4;
        const auto data = testing::random_features(rng, 12, 5, k);
        auto params = zero_linear(binary ? 1 : k, 5);
        testing::randomize(params, rng);
        const auto batch = all_rows(12);
        auto grad = testing::zeros(params);
        linear_loss(kind, params, data, batch, binary, 1e-2, &grad);
        worst_linear = std::max(
            worst_linear,
            testing::gradient_error(
                params,
                [&](const LinearParams& p) {
                  return linear_loss(kind, p, data, batch, binary, 1e-2, nullptr);
                },
                grad));
      }
    }
  }
  for (int draw = 0; draw < 20; ++draw) {
    const auto data = testing::random_features(rng, 3, 4, 3);
    auto params = zero_mlp(4, {6, 5}, 3);
    testing::randomize(params, rng);
    const auto batch = all_rows(3);
    auto grad = testing::zeros(params);
    mlp_loss(params, data, batch, 0.0, nullptr, &grad);
    worst_mlp = std::max(
        worst_mlp, testing::gradient_error(
                       params,
                       [&](const MlpParams& p) { return mlp_loss(p, data, batch, 0.0, nullptr, nullptr); },
                       grad));
  }
  for (int draw = 0; draw < 20; ++draw) {
    const auto data = testing::random_sequences(rng, 2, 3, 3, 3);
    auto params = zero_bilstm(3, 4, 3);
    testing::randomize(params, rng);
    const auto batch = all_rows(2);
    auto grad = testing::zeros(params);
    bilstm_loss(params, data, batch, &grad);
    worst_lstm = std::max(
        worst_lstm,
        testing::gradient_error(
            params, [&](const BiLstmParams& p) { return bilstm_loss(p, data, batch, nullptr); }, grad));
  }
  check(worst_linear < 1e-4, "linear " + fmt(worst_linear));
  check(worst_mlp < 1e-4, "mlp " + fmt(worst_mlp));
  check(worst_lstm < 1e-3, "bilstm " + fmt(worst_lstm));
  std::cout << "  worst relative error: linear " << fmt(worst_linear) << ", mlp " << fmt(worst_mlp)
            << ", bilstm " << fmt(worst_lstm) << '\n';
}

// ---------------------------------------------------------------- 5

classifiers::Hyperparameters tuned() {
  classifiers::Hyperparameters hp;
  hp.learning_rate = 0.5;
  hp.epochs = 100;
  return hp;
}

void end_to_end(Check& check) {
  const auto bundle = synthetic::generate();
  check(bundle.corpus.dpas.size() >= 8, "fewer than 8 DPAs");
  pipeline::Featurizer f(std::make_shared<embedding::StoreProvider>(bundle.store), bundle.aliases);
  const auto split = corpus::split_dpas(bundle.corpus, {42});
  for (auto algorithm : {Algorithm::kLogReg, Algorithm::kMlp}) {
    pipeline::TrainPlan plan;
    plan.binary = false;
    plan.algorithm = algorithm;
    plan.hp = tuned();
    plan.seed = 1;
    const auto models =
        pipeline::train_all(balance::from_corpus(split.train), bundle.corpus.catalog, plan, f);
    const auto result = pipeline::evaluate(
        pipeline::select_models(models, pipeline::Formulation::kMulticlass), split.eval, f);
    const std::string name(classifiers::algorithm_name(algorithm));
    std::cout << "  " << name << " macro-F2 " << fmt(result.dpa_level.macro.f_beta) << " over "
              << result.reports.size() << " eval DPAs\n";
    check(result.dpa_level.macro.f_beta >= 0.9, name + " macro-F2 " + fmt(result.dpa_level.macro.f_beta));
    for (const auto& report : result.reports) {
      check(report.violations() == bundle.planted_missing.at(report.dpa_id),
            name + " verdict for " + report.dpa_id);
    }
  }
}

// ---------------------------------------------------------------- 6

classifiers::FeatureMatrix clusters(std::size_t per_class, std::size_t classes, std::size_t dim,
                                    std::uint64_t seed) {
  Rng centers(1), rng(seed);
  classifiers::Matrix mu(classes, dim);
  for (auto& v : mu.data) v = 4.0 * centers.normal() / std::sqrt(static_cast<double>(dim));
  classifiers::FeatureMatrix f{classifiers::Matrix(per_class * classes, dim), {}};
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto r = c * per_class + i;
      for (std::size_t j = 0; j < dim; ++j) f.x(r, j) = mu(c, j) + 0.3 * rng.normal();
      f.labels.push_back(c);
    }
  }
  return f;
}

void fewshot_reduction(Check& check) {
  classifiers::Hyperparameters hp;
  hp.epochs = 60;
  hp.learning_rate = 0.1;
  hp.batch_size = 8;

  const auto task = TaskSpec::multiclass(numbered_catalog(2));
  const auto train = clusters(10, 3, 5, 31);
  fewshot::ContrastiveOptions none;
  none.epochs = 0;
  const auto few = fewshot::fit_fewshot(train, task, hp, none, 9);
  const auto plain = classifiers::fit_linear(Algorithm::kLogReg, train, task, hp, 9);
  Rng rng(3);
  std::size_t differ = 0;
  for (int probe = 0; probe < 100; ++probe) {
    std::vector<double> x(5);
    for (auto& v : x) v = 3 * rng.normal();
    differ += classifiers::predict_scores(few, x) != classifiers::predict_scores(plain, x);
  }
  check(differ == 0, std::to_string(differ) + " of 100 probes differ");

  const auto task4 = TaskSpec::multiclass(numbered_catalog(3));
  const auto pool = clusters(30, 4, 8, 41);
  const auto held_out = clusters(20, 4, 8, 42);
  const auto model = fewshot::fit_fewshot(pool, task4, hp, {}, fewshot::ShotSpec::from_count(10), 5);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    ok += classifiers::decide(model, classifiers::predict_scores(model, held_out.x.row(i))) ==
          held_out.labels[i];
  }
  check(ok == held_out.size(), "10-shot accuracy " + std::to_string(ok) + "/" +
                                   std::to_string(held_out.size()));
}

// ---------------------------------------------------------------- 7

void kappa(Check& check) {
  const std::vector<std::string> a = {"1", "1", "0", "0"}, b = {"1", "0", "0", "0"};
  check(eval::cohen_kappa(a, b) == 0.5, "kappa hand example " + fmt(eval::cohen_kappa(a, b)));
  check(eval::cohen_kappa(a, a) == 1.0, "kappa(x, x)");
  check(eval::kappa_band(0.82) == "almost perfect agreement", "band(0.82) " + eval::kappa_band(0.82));
}

// ---------------------------------------------------------------- 8 and 9

// Synthetic bundle written to disk, shared by the CLI criteria.
struct Workspace {
  fs::path dir;
  synthetic::SyntheticBundle bundle;
  std::string file(const char* name) const { return (dir / "synth" / name).string(); }
  std::string long_dpa() const { return (dir / "long.jsonl").string(); }

  Workspace() : bundle(synthetic::generate()) {
    dir = fs::temp_directory_path() / ("dpacheck_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    // The throughput DPA lives in the same store as the training corpus.
    auto dpa = synthetic::generate_dpa(bundle, "DPA-LONG", 184, 77, {corpus::ProvisionId("PO4")});
    synthetic::write_bundle(bundle, (dir / "synth").string());
    corpus::save_ground_truth({bundle.corpus.catalog, {std::move(dpa)}, ""}, long_dpa());
  }
  ~Workspace() { fs::remove_all(dir); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

// Runs a command twice into the same paths and compares the manifest and
// every output file it lists.
void rerun_identical(Check& check, const std::string& name, const std::vector<std::string>& args,
                     const fs::path& manifest) {
  if (run_cli(args) != 0) return check(false, name + " failed");
  const auto first = slurp(manifest);
  std::map<std::string, std::string> outputs;
  const auto m = nlohmann::json::parse(first);
  for (const auto& [role, o] : m.at("outputs").items()) {
    outputs[role] = slurp(o.at("path").get<std::string>());
  }
  if (run_cli(args) != 0) return check(false, name + " rerun failed");
  check(slurp(manifest) == first, name + " manifest differs");
  for (const auto& [role, bytes] : outputs) {
    check(slurp(m.at("outputs").at(role).at("path").get<std::string>()) == bytes,
          name + " " + role + " differs");
  }
  check(!outputs.empty(), name + " lists no outputs");
}

void determinism(Check& check) {
  const auto& w = ws();
  const auto gt = w.file("ground_truth.jsonl"), cat = w.file("catalog.json");
  const auto store = w.file("store.bin"), aliases = w.file("aliases.tsv");
  const auto out = [&](const char* n) { return (w.dir / n).string(); };
  rerun_identical(check, "split",
                  {"split", "--data", gt, "--catalog", cat, "--seed", "42", "--out", out("split")},
                  w.dir / "split" / "manifest.json");
  rerun_identical(check, "train",
                  {"train", "--data", gt, "--catalog", cat, "--store", store, "--aliases", aliases,
                   "--task", "multiclass", "--algorithm", "mlp", "--epochs", "20", "--seed", "3",
                   "--out", out("det_model.bin")},
                  w.dir / "det_model.bin.manifest.json");
  rerun_identical(check, "balance",
                  {"balance", "--data", gt, "--catalog", cat, "--method", "RUOS", "--seed", "4",
                   "--out", out("det_ruos.jsonl")},
                  w.dir / "det_ruos.jsonl.manifest.json");
  rerun_identical(check, "fewshot",
                  {"fewshot", "--data", gt, "--catalog", cat, "--store", store, "--aliases", aliases,
                   "--task", "multiclass", "--shots", "30%", "--seed", "5", "--out",
                   out("det_few.bin")},
                  w.dir / "det_few.bin.manifest.json");
}

void throughput(Check& check) {
  const auto& w = ws();
  const auto model = (w.dir / "binary_model.bin").string();
  // Model training is set-up, not part of the timed user path.
  if (run_cli({"train", "--data", w.file("ground_truth.jsonl"), "--catalog", w.file("catalog.json"),
               "--store", w.file("store.bin"), "--aliases", w.file("aliases.tsv"), "--task",
               "binary", "--lr", "0.5", "--epochs", "100", "--out", model}) != 0) {
    return check(false, "training the binary models failed");
  }
  const auto start = std::chrono::steady_clock::now();
  std::string report;
  const int code = run_cli({"check", "--dpa", w.long_dpa(),
                            "--catalog", w.file("catalog.json"), "--store", w.file("store.bin"),
                            "--aliases", w.file("aliases.tsv"), "--model", model, "--task", "binary"},
                           &report);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "  184-sentence check took " << fmt(secs) << " s\n";
  check(code == 0, "check exit code " + std::to_string(code));
  check(secs <= 20.0, "check took " + fmt(secs) + " s");
  check(report.find("VIOLATION PO4:") != std::string::npos, "report does not flag the missing PO4");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "F2 oracle at the reported operating points", 1, f2_oracle},
      {2, "augmentation count identities at N = 2,871", 30, augmentation_counts},
      {3, "resampling profiles and 200-vector property test", 10, resampling},
      {4, "gradient checks on 20 draws per model", 120, gradients},
      {5, "end-to-end synthetic corpus, logreg and mlp", 300, end_to_end},
      {6, "few-shot reduction and 10-shot accuracy", 60, fewshot_reduction},
      {7, "kappa hand example and bands", 1, kappa},
      {8, "rerun determinism of split, train, balance, fewshot", 300, determinism},
      {9, "184-sentence DPA through check", 300, throughput},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(check);
    } catch (const std::exception& e) {
      check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    check(secs < c.budget_s, "over budget of " + fmt(c.budget_s) + " s");
    const bool ok = check.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " ("
              << fmt(secs) << " s)\n";
    for (const auto& f : check.failures) std::cout << "      " << f << '\n';
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
