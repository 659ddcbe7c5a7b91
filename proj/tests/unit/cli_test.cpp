#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "dpacheck");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = dpacheck::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Synthetic bundle plus a tuned multiclass model, built once per process.
struct Workspace {
  fs::path dir;
  fs::path data() const { return dir / "synth"; }
  std::string file(const char* name) const { return (data() / name).string(); }
  std::string model() const { return (dir / "model.bin").string(); }

  Workspace() {
    dir = fs::temp_directory_path() / ("dpacheck_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run({"synth", "--out", data().string()}).code == 0);
    const auto r = run({"train", "--data", file("ground_truth.jsonl"), "--catalog", file("catalog.json"),
                        "--store", file("store.bin"), "--aliases", file("aliases.tsv"), "--task",
                        "multiclass", "--lr", "0.5", "--epochs", "100", "--out", model()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  ~Workspace() { fs::remove_all(dir); }
};

const Workspace& ws() {
  static Workspace w;
  return w;
}

std::vector<std::string> provider(const Workspace& w) {
  return {"--catalog", w.file("catalog.json"), "--store", w.file("store.bin"), "--aliases",
          w.file("aliases.tsv"), "--model", w.model()};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help works for every subcommand") {
  CHECK(run({"--help"}).code == 0);
  for (const char* sub : {"preprocess", "split", "stats", "balance", "augment", "train", "grid",
                          "fewshot", "predict", "check", "evaluate", "kappa", "bench",
                          "validate-store", "synth"}) {
    const auto r = run({sub, "--help"});
    CHECK_MESSAGE(r.code == 0, sub);
    CHECK_MESSAGE(r.out.find("Usage") != std::string::npos, sub);
  }
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"stats", "--bogus"}).code == 1);
  CHECK(run({"split", "--seed", "42"}).code == 1);
}

TEST_CASE("check on a fully covered DPA") {
  const auto& w = ws();
  const auto r = run(std::vector<std::string>{"check", "--dpa", w.file("ground_truth.jsonl"), "--dpa-id",
                                              "DPA-01"} + provider(w));
  CHECK_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("COMPLETE: yes") != std::string::npos);
  CHECK(r.out.find("VIOLATION") == std::string::npos);

  const auto json = run(std::vector<std::string>{"check", "--dpa", w.file("ground_truth.jsonl"), "--dpa-id",
                                                 "DPA-02", "--format", "json"} + provider(w));
  CHECK(json.code == 0);
  const auto doc = nlohmann::json::parse(json.out);
  CHECK(doc.at("complete") == false);
}

TEST_CASE("train with a missing class exits 2 naming the provision") {
  const auto& w = ws();
  // Drop every PO4 sentence.
  std::ifstream in(w.file("ground_truth.jsonl"));
  const auto path = (w.dir / "no_po4.jsonl").string();
  std::ofstream out(path);
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"PO4\"") == std::string::npos) out << line << '\n';
  }
  out.close();
  const auto r = run({"train", "--data", path, "--catalog", w.file("catalog.json"), "--store",
                      w.file("store.bin"), "--aliases", w.file("aliases.tsv"), "--task",
                      "multiclass", "--out", (w.dir / "x.bin").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("PO4") != std::string::npos);
}

TEST_CASE("split twice with the same seed gives identical artifacts") {
  const auto& w = ws();
  const auto out = (w.dir / "split").string();
  std::vector<std::string> args = {"split", "--data", w.file("ground_truth.jsonl"), "--catalog",
                                   w.file("catalog.json"), "--seed", "42", "--out", out};
  REQUIRE(run(args).code == 0);
  const auto first = slurp(fs::path(out) / "manifest.json");
  const auto train1 = slurp(fs::path(out) / "train.jsonl");
  REQUIRE(run(args).code == 0);
  CHECK(slurp(fs::path(out) / "manifest.json") == first);
  CHECK(slurp(fs::path(out) / "train.jsonl") == train1);
  const auto m = nlohmann::json::parse(first);
  CHECK(m.at("seed") == 42);
  CHECK(m.contains("config_digest"));
}

TEST_CASE("data errors exit 2") {
  const auto& w = ws();
  const auto bad = (w.dir / "bad.jsonl").string();
  std::ofstream(bad) << "{broken\n";
  CHECK(run({"stats", "--data", bad, "--catalog", w.file("catalog.json")}).code == 2);
  const auto store = (w.dir / "bad.bin").string();
  std::ofstream(store) << "DPAEMBED";
  const auto v = run({"validate-store", store});
  CHECK(v.code == 2);
  CHECK(run({"validate-store", w.file("store.bin")}).code == 0);
}

TEST_CASE("embedding service failures exit 3") {
  const auto& w = ws();
  const auto r = run(std::vector<std::string>{"check", "--dpa", w.file("ground_truth.jsonl"), "--dpa-id",
                                              "DPA-01", "--catalog", w.file("catalog.json"),
                                              "--endpoint", "http://127.0.0.1:9/embed", "--model",
                                              w.model()});
  CHECK(r.code == 3);
}

TEST_CASE("stats, balance, augment, predict, evaluate and kappa run") {
  const auto& w = ws();
  const auto gt = w.file("ground_truth.jsonl");
  const auto cat = w.file("catalog.json");
  const auto s = run({"stats", "--data", gt, "--catalog", cat});
  CHECK(s.code == 0);
  CHECK(s.out.find("PO19") != std::string::npos);

  const auto bal = (w.dir / "ruos.jsonl").string();
  CHECK(run({"balance", "--data", gt, "--catalog", cat, "--method", "RUOS", "--out", bal}).code == 0);
  CHECK(fs::exists(bal + ".manifest.json"));

  CHECK(run({"augment", "--list-recipes"}).out.find("ALL+RUOS") != std::string::npos);
  const auto aug = (w.dir / "ni.jsonl").string();
  CHECK(run({"augment", "--data", gt, "--catalog", cat, "--recipe", "NI", "--out", aug}).code == 0);
  const auto missing = run({"augment", "--data", gt, "--catalog", cat, "--recipe", "SR", "--out", aug});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("SR") != std::string::npos);

  const auto preds = (w.dir / "preds.jsonl").string();
  CHECK(run(std::vector<std::string>{"predict", "--dpa", gt, "--dpa-id", "DPA-03", "--out", preds} +
            provider(w)).code == 0);
  CHECK(fs::file_size(preds) > 0);

  const auto e = run(std::vector<std::string>{"evaluate", "--data", gt} + provider(w));
  CHECK(e.code == 0);
  CHECK(e.out.find("F2") != std::string::npos);

  const auto a = (w.dir / "a.txt").string(), b = (w.dir / "b.txt").string();
  std::ofstream(a) << "1\n1\n0\n0\n";
  std::ofstream(b) << "1\n0\n0\n0\n";
  const auto k = run({"kappa", a, b});
  CHECK(k.code == 0);
  CHECK(k.out.find("0.5") != std::string::npos);
  CHECK(k.out.find("moderate") != std::string::npos);
}

TEST_CASE("preprocess writes sentences, candidates and an audit trail") {
  const auto& w = ws();
  const auto text = (w.dir / "acme.txt").string();
  std::ofstream(text) << "Acme Cloud Services shall delete data. The importer agrees: it shall notify.";
  const auto aliases = (w.dir / "aliases.tsv").string();
  std::ofstream(aliases) << "importer\tPROCESSOR\n";
  const auto out = (w.dir / "acme.jsonl").string();
  const auto audit = (w.dir / "acme.audit.jsonl").string();
  const auto r = run({"preprocess", "--text", text, "--aliases", aliases, "--out", out, "--audit",
                      audit, "--review"});
  CHECK_MESSAGE(r.code == 0, r.err);
  const auto sentences = slurp(out);
  CHECK(sentences.find("The PROCESSOR agrees:") != std::string::npos);
  CHECK(slurp(audit).find("importer") != std::string::npos);
  CHECK(r.out.find("Acme Cloud Services") != std::string::npos);
}

TEST_CASE("fewshot and grid write models and leaderboards") {
  const auto& w = ws();
  const auto gt = w.file("ground_truth.jsonl");
  const auto few = (w.dir / "few.bin").string();
  const auto f = run({"fewshot", "--data", gt, "--catalog", w.file("catalog.json"), "--store",
                      w.file("store.bin"), "--aliases", w.file("aliases.tsv"), "--task",
                      "multiclass", "--shots", "30%", "--out", few});
  CHECK_MESSAGE(f.code == 0, f.err);
  const auto fm = nlohmann::json::parse(slurp(few + ".manifest.json"));
  CHECK(fm.at("details").dump().find("30%") != std::string::npos);

  const auto board = (w.dir / "grid.tsv").string();
  const auto g = run({"grid", "--train", gt, "--val", gt, "--catalog", w.file("catalog.json"),
                      "--store", w.file("store.bin"), "--aliases", w.file("aliases.tsv"),
                      "--epoch-values", "1", "--batch-sizes", "32", "--out", board});
  CHECK_MESSAGE(g.code == 0, g.err);
  std::ifstream in(board);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 3);  // header plus the two learning rates
}

TEST_CASE("the shipped synthetic bundle matches the generator") {
  const char* data = std::getenv("DPACHECK_TEST_DATA");
  if (data == nullptr) return;
  const auto shipped = fs::path(data) / "synthetic";
  REQUIRE(fs::exists(shipped));
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(ws().data())) {
    const auto name = entry.path().filename();
    CHECK_MESSAGE(slurp(shipped / name) == slurp(entry.path()), name.string());
    ++files;
  }
  CHECK(files == 8);
}

}  // TEST_SUITE
