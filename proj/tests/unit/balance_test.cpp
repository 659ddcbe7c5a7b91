#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "dpacheck/balance.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/preprocess.hpp"
#include "dpacheck/random.hpp"
#include "dpacheck/synthetic.hpp"
#include "helpers.hpp"

using namespace dpacheck;
using namespace dpacheck::balance;
using classifiers::TaskSpec;
using corpus::ProvisionId;

namespace {

const corpus::ProvisionCatalog& catalog() {
  static const auto c = testing::catalog(19);
  return c;
}

TaskSpec multiclass() { return TaskSpec::multiclass(catalog()); }

// Examples with the given class sizes; "other" has no labels.
Dataset with_counts(const std::map<std::string, std::size_t>& counts) {
  Dataset d;
  std::size_t idx = 0;
  for (const auto& [cls, n] : counts) {
    for (std::size_t i = 0; i < n; ++i, ++idx) {
      Example e;
      e.sentence = {"D", idx, cls + " sentence " + std::to_string(i), {}};
      if (cls != "other") e.sentence.gold_labels.push_back(ProvisionId(cls));
      d.push_back(std::move(e));
    }
  }
  return d;
}

std::map<std::string, std::size_t> counts_of(const Dataset& d, const TaskSpec& task) {
  std::map<std::string, std::size_t> out;
  const auto c = class_counts(d, task);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] > 0) out[task.classes[i]] = c[i];
  }
  return out;
}

// Every output example must be an input example (same labels and text).
void check_provenance(const Dataset& in, const Dataset& out) {
  std::map<std::pair<std::string, std::size_t>, const Example*> by_key;
  for (const auto& e : in) by_key[{e.sentence.dpa_id, e.sentence.sentence_index}] = &e;
  for (const auto& e : out) {
    const auto it = by_key.find({e.sentence.dpa_id, e.sentence.sentence_index});
    REQUIRE(it != by_key.end());
    CHECK(it->second->sentence.gold_labels == e.sentence.gold_labels);
    CHECK(it->second->sentence.text == e.sentence.text);
  }
}

std::multiset<std::string> token_multiset(const std::string& text) {
  const auto t = preprocess::token_texts(preprocess::tokenize(text));
  return {t.begin(), t.end()};
}

std::vector<corpus::Sentence> plain_sentences() {
  return {{"D", 0, "The processor shall delete personal data on request.", {ProvisionId("PO1")}},
          {"D", 1, "The processor shall encrypt stored records.", {ProvisionId("PO2")}},
          {"D", 2, "It is so.", {ProvisionId("PO3")}}};
}

class FlakyMt : public MtClient {
 public:
  explicit FlakyMt(std::size_t fail_every) : every_(fail_every) {}
  std::string translate(const std::string& text, const std::string&, const std::string&) override {
    if (++calls_ % every_ == 0) throw ServiceError("mt down");
    return text + " ";
  }

 private:
  std::size_t every_;
  std::size_t calls_ = 0;
};

}  // namespace

TEST_SUITE("balance") {

TEST_CASE("undersample examples") {
  const auto task = multiclass();
  const auto d = with_counts({{"other", 1000}, {"PO6", 200}, {"PO1", 50}});
  const auto out = random_undersample(d, task, 1);
  CHECK(counts_of(out, task) == std::map<std::string, std::size_t>{{"PO1", 50}, {"PO6", 200}, {"other", 200}});
  check_provenance(d, out);
  const auto balanced = with_counts({{"other", 10}, {"PO6", 10}});
  CHECK(random_undersample(balanced, task, 1) == balanced);
}

TEST_CASE("binary undersample keeps every positive") {
  const auto task = TaskSpec::binary(ProvisionId("PO1"));
  const auto d = with_counts({{"other", 20000}, {"PO1", 187}});
  const auto out = random_undersample(d, task, 2);
  const auto c = class_counts(out, task);
  CHECK(c[0] == 187);
  CHECK(c[1] == 187);
  check_provenance(d, out);
  std::set<std::size_t> ids;
  for (const auto& e : out) ids.insert(e.sentence.sentence_index);
  CHECK(ids.size() == out.size());
}

TEST_CASE("oversample examples") {
  const auto task = multiclass();
  const auto d = with_counts({{"other", 1000}, {"PO1", 50}, {"PO2", 30}});
  const auto out = random_oversample(d, task, 3);
  CHECK(counts_of(out, task) ==
        std::map<std::string, std::size_t>{{"PO1", 1000}, {"PO2", 1000}, {"other", 1000}});
  check_provenance(d, out);
  // Originals come first, unchanged and in order.
  CHECK(Dataset(out.begin(), out.begin() + static_cast<long>(d.size())) == d);
  const auto balanced = with_counts({{"other", 10}, {"PO6", 10}});
  CHECK(random_oversample(balanced, task, 1) == balanced);
}

TEST_CASE("binary oversample of 3 vs 1 adds two copies of the minority example") {
  const auto task = TaskSpec::binary(ProvisionId("PO1"));
  const auto d = with_counts({{"other", 3}, {"PO1", 1}});
  const auto out = random_oversample(d, task, 4);
  REQUIRE(out.size() == 6);
  const auto minority = std::find_if(d.begin(), d.end(), [](const Example& e) {
    return e.sentence.satisfies_any();
  });
  std::size_t copies = 0;
  for (const auto& e : out) {
    if (e.origin == Origin::kDuplicate) {
      ++copies;
      CHECK(e.sentence == minority->sentence);
    }
  }
  CHECK(copies == 2);
}

TEST_CASE("under-oversample examples") {
  const auto task = multiclass();
  const auto d = with_counts({{"other", 1000}, {"PO6", 200}, {"PO1", 50}, {"PO2", 30}});
  const auto out = under_oversample(d, task, 5);
  for (const auto& [cls, n] : counts_of(out, task)) CHECK(n == 200);
  CHECK(counts_of(out, task).size() == 4);
  check_provenance(d, out);
  const auto balanced = with_counts({{"other", 10}, {"PO6", 10}});
  CHECK(counts_of(under_oversample(balanced, task, 1), task) == counts_of(balanced, task));
  CHECK_THROWS_AS(under_oversample(d, TaskSpec::binary(ProvisionId("PO1")), 1), ValidationError);
}

TEST_CASE("resampling profiles on 200 random count vectors") {
  const auto task = multiclass();
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::size_t> counts;
    const auto k = 1 + rng.index(5);
    for (std::size_t c = 0; c < k; ++c) counts["PO" + std::to_string(1 + rng.index(19))] = 1 + rng.index(40);
    counts["other"] = 1 + rng.index(120);
    const auto d = with_counts(counts);
    std::size_t largest_minority = 0, majority = 0;
    for (const auto& [cls, n] : counts) {
      majority = std::max(majority, n);
      if (cls != "other") largest_minority = std::max(largest_minority, n);
    }
    const std::uint64_t seed = rng.next();

    const auto ru = counts_of(random_undersample(d, task, seed), task);
    for (const auto& [cls, n] : counts) {
      CHECK(ru.at(cls) == (cls == "other" ? std::min(n, largest_minority) : n));
    }
    const auto ro = counts_of(random_oversample(d, task, seed), task);
    for (const auto& [cls, n] : counts) CHECK(ro.at(cls) == majority);
    const auto ruos = counts_of(under_oversample(d, task, seed), task);
    const auto level = std::min(counts.at("other"), largest_minority) == counts.at("other")
                           ? std::max(largest_minority, counts.at("other"))
                           : largest_minority;
    for (const auto& [cls, n] : counts) CHECK(ruos.at(cls) == level);
    CHECK(random_undersample(d, task, seed) == random_undersample(d, task, seed));
  }
}

TEST_CASE("dataset files round trip") {
  auto d = with_counts({{"other", 2}, {"PO3", 1}});
  d.push_back(d[2]);
  d.back().origin = Origin::kAugmented;
  d.back().method = AugmentMethod::kNoiseCrop;
  d.back().params = "window=1..3";
  std::ostringstream out;
  write_dataset(d, out);
  std::istringstream in(out.str());
  CHECK(read_dataset(in, catalog()) == d);
}

TEST_CASE("lexicon parsing") {
  std::istringstream ok("delete\terase,remove\nEncrypt\tcipher\n");
  const auto lex = parse_lexicon(ok, "lex");
  CHECK(lex.entries.at("delete") == std::vector<std::string>{"erase", "remove"});
  CHECK(lex.entries.count("encrypt") == 1);
  std::istringstream self("delete\tdelete\n");
  CHECK_THROWS_AS(parse_lexicon(self, "lex"), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_lexicon(empty, "lex"), ValidationError);
}

TEST_CASE("content words") {
  CHECK(is_content_word("delete"));
  CHECK_FALSE(is_content_word("the"));
  CHECK_FALSE(is_content_word("."));
  CHECK_FALSE(is_content_word("v2"));
}

TEST_CASE("synonym replacement") {
  SynonymLexicon lex{"lex", {{"delete", {"erase"}}}};
  const std::vector<corpus::Sentence> s = {{"D", 0, "processor shall delete data", {ProvisionId("PO1")}},
                                           {"D", 1, "nothing matches here", {ProvisionId("PO1")}}};
  const auto r = augment_synonym(s, {lex}, 1);
  REQUIRE(r.variants.size() == 1);
  CHECK(r.variants[0].text == "processor shall erase data");
  CHECK(r.variants[0].base == s[0]);
  CHECK(r.dropped == 1);
}

TEST_CASE("synonym replacement keeps case and spacing and replaces at most r words") {
  SynonymLexicon lex{"lex", {{"delete", {"erase"}}, {"data", {"records"}}, {"shall", {"must"}}}};
  const std::vector<corpus::Sentence> s = {{"D", 0, "Delete  data, shall", {}}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = augment_synonym(s, {lex}, seed, 2);
    REQUIRE(r.variants.size() == 1);
    const auto& t = r.variants[0].text;
    int changed = (t.find("Erase") != std::string::npos) + (t.find("records") != std::string::npos);
    CHECK(changed >= 1);
    CHECK(changed <= 2);
    CHECK(t.find("  ") != std::string::npos);
  }
}

TEST_CASE("embedding replacement equals the brute-force nearest word") {
  embedding::EmbeddingStore store(2, "toy");
  const std::map<std::string, embedding::EmbeddingVector> vocab = {
      {"delete", {1, 0.1f}}, {"erase", {1, 0.2f}}, {"encrypt", {0, 1}},
      {"cipher", {0.1f, 1}}, {"records", {-1, 0}}};
  for (const auto& [w, v] : vocab) store.add_word(w, v);
  const std::vector<corpus::Sentence> s = {{"D", 0, "delete records", {ProvisionId("PO1")}}};
  const auto r = augment_embedding(s, store, 3, 7);
  REQUIRE(r.variants.size() == 3);
  for (const auto& v : r.variants) {
    // Which word changed, and is the new word its exhaustive-scan nearest?
    const auto before = preprocess::token_texts(preprocess::tokenize(s[0].text));
    const auto after = preprocess::token_texts(preprocess::tokenize(v.text));
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (before[i] == after[i]) continue;
      std::string best;
      double best_sim = -2;
      for (const auto& [w, vec] : vocab) {
        if (w == before[i]) continue;
        const double sim = embedding::cosine(vocab.at(before[i]), vec);
        if (sim > best_sim) best_sim = sim, best = w;
      }
      CHECK(after[i] == best);
    }
  }
  embedding::EmbeddingStore lonely(2, "one");
  lonely.add_word("delete", {1, 0});
  CHECK(augment_embedding(s, lonely, 1, 1).dropped == 1);
  CHECK_THROWS_AS(augment_embedding(s, embedding::EmbeddingStore(2, "none"), 1, 1), CapabilityError);
}

TEST_CASE("noise ops keep the documented token multisets") {
  const auto sentences = synthetic::positive_sentences(60, 3);
  const auto vocab = content_vocabulary(sentences);
  const NoiseOp all[] = {NoiseOp::kSwap, NoiseOp::kDelete, NoiseOp::kSubstitute, NoiseOp::kCrop};
  const auto r = augment_noise(sentences, all, vocab, 11);
  CHECK(r.dropped == 0);
  CHECK(r.variants.size() == 240);
  for (const auto& v : r.variants) {
    const auto base = token_multiset(v.base.text);
    const auto now = token_multiset(v.text);
    const auto n = base.size();
    CHECK(v.base.gold_labels == sentences[v.base.sentence_index].gold_labels);
    switch (v.method) {
      case AugmentMethod::kNoiseSwap:
        CHECK(now == base);
        break;
      case AugmentMethod::kNoiseDelete: {
        CHECK(now.size() == n - (n + 9) / 10);
        CHECK(std::includes(base.begin(), base.end(), now.begin(), now.end()));
        break;
      }
      case AugmentMethod::kNoiseSubstitute:
        CHECK(now.size() == n);
        break;
      case AugmentMethod::kNoiseCrop: {
        const auto bt = preprocess::token_texts(preprocess::tokenize(v.base.text));
        const auto nt = preprocess::token_texts(preprocess::tokenize(v.text));
        CHECK(nt.size() * 10 >= bt.size() * 7);
        CHECK(std::search(bt.begin(), bt.end(), nt.begin(), nt.end()) != bt.end());
        break;
      }
      default:
        FAIL("unexpected method");
    }
  }
  CHECK(augment_noise(sentences, all, vocab, 11).variants.size() == r.variants.size());
}

TEST_CASE("swap on two tokens exchanges them; short sentences are dropped") {
  const std::vector<corpus::Sentence> two = {{"D", 0, "alpha beta", {}}};
  const NoiseOp swap[] = {NoiseOp::kSwap};
  NoiseConfig cfg;
  cfg.min_tokens = 2;
  const auto r = augment_noise(two, swap, {}, 1, cfg);
  REQUIRE(r.variants.size() == 1);
  CHECK(r.variants[0].text == "beta alpha");
  CHECK(augment_noise(two, swap, {}, 1).dropped == 1);
}

TEST_CASE("crop covering the whole sentence is an identity variant") {
  const std::vector<corpus::Sentence> s = {{"D", 0, "one two three four", {}}};
  const NoiseOp crop[] = {NoiseOp::kCrop};
  NoiseConfig cfg;
  cfg.crop_keep = 1.0;
  const auto r = augment_noise(s, crop, {}, 1, cfg);
  REQUIRE(r.variants.size() == 1);
  CHECK(r.variants[0].identity);
  CHECK(r.variants[0].text == s[0].text);
}

TEST_CASE("back-translation stubs") {
  const auto s = plain_sentences();
  IdentityMtClient id;
  const auto r = augment_backtranslate(s, id);
  REQUIRE(r.variants.size() == 6);
  for (const auto& v : r.variants) {
    CHECK(v.identity);
    CHECK(v.text == v.base.text);
  }

  const std::map<std::string, std::string> table = {{"delete", "remove"}, {"stored", "kept"}};
  TableMtClient stub("en", table);
  const auto t = augment_backtranslate(s, stub, {"fr"});
  REQUIRE(t.variants.size() == 3);
  // Oracle: apply the stub's table word by word.
  for (const auto& v : t.variants) {
    auto words = preprocess::token_texts(preprocess::tokenize(v.base.text));
    for (auto& w : words) {
      if (auto it = table.find(w); it != table.end()) w = it->second;
    }
    CHECK(v.text == preprocess::detokenize(words));
    CHECK(v.identity == (v.text == v.base.text));
  }
}

TEST_CASE("back-translation failures are recorded, then abort") {
  const auto s = synthetic::positive_sentences(20, 1);
  FlakyMt some(10);  // one call in ten fails
  const auto r = augment_backtranslate(s, some, {"fr"});
  CHECK(r.failures > 0);
  CHECK(r.variants.size() + r.failures == 20);
  CHECK(r.errors.size() == r.failures);
  FlakyMt most(2);
  CHECK_THROWS_AS(augment_backtranslate(s, most, {"fr"}), ServiceError);
}

TEST_CASE("count identities at N = 2,871") {
  const auto pos = synthetic::positive_sentences(2871, 5);
  const auto bundle = synthetic::generate();
  const auto bt = augment_backtranslate(pos, *std::make_shared<IdentityMtClient>());
  CHECK(bt.variants.size() == 5742);
  const auto sr = augment_synonym(pos, bundle.lexicons, 5);
  CHECK(sr.dropped == 0);
  CHECK(sr.variants.size() == 5742);
  const auto er = augment_embedding(pos, *bundle.store, 3, 5);
  CHECK(er.dropped == 0);
  CHECK(er.variants.size() == 8613);
  const NoiseOp all[] = {NoiseOp::kSwap, NoiseOp::kDelete, NoiseOp::kSubstitute, NoiseOp::kCrop};
  const auto ni = augment_noise(pos, all, content_vocabulary(pos), 5);
  CHECK(ni.dropped == 0);
  CHECK(ni.variants.size() == 11484);
}

TEST_CASE("there are 13 built-in recipes") {
  const auto r = builtin_recipes();
  CHECK(r.size() == 13);
  std::set<std::string> names;
  for (const auto& x : r) {
    CHECK_NOTHROW(x.validate());
    names.insert(x.name);
  }
  CHECK(names.size() == 13);
  CHECK(find_recipe("ER").steps[0].multiplicity == 3);
  CHECK(find_recipe("NI").steps[0].multiplicity == 4);
  CHECK_THROWS_AS(find_recipe("XX"), ValidationError);
  VariantRecipe twice{"bad", {{RecipeStep::Kind::kOversample}, {RecipeStep::Kind::kOversample}}};
  CHECK_THROWS_AS(twice.validate(), ValidationError);
}

TEST_CASE("single oversample recipe") {
  const auto task = multiclass();
  const auto d = with_counts({{"other", 100}, {"PO1", 10}});
  const auto v = build_variant(d, task, {"over", {{RecipeStep::Kind::kOversample}}}, 1, {});
  CHECK(counts_of(v.dataset, task) == std::map<std::string, std::size_t>{{"PO1", 100}, {"other", 100}});
  CHECK(v.manifest.total == 200);
}

TEST_CASE("recipe composition equals running the steps by hand") {
  const auto task = multiclass();
  auto train = from_corpus(synthetic::generate().corpus);
  RecipeStep ni{RecipeStep::Kind::kAugment, std::nullopt, AugmentFamily::kNoise, 4};
  RecipeStep over{RecipeStep::Kind::kOversample};
  const auto v = build_variant(train, task, {"NI+RO", {ni, over}}, 9, {});
  // Oracle: class counts after NI are originals plus one variant per positive
  // sentence and op (none are too short), then every class rises to the max.
  auto expected = class_counts(train, task);
  for (const auto& e : train) {
    const auto c = task.class_of(e.sentence.gold_labels);
    if (c != task.other_index()) expected[c] += 4;
  }
  const auto top = *std::max_element(expected.begin(), expected.end());
  for (auto& n : expected) {
    if (n > 0) n = top;
  }
  CHECK(class_counts(v.dataset, task) == expected);
  CHECK(v.manifest.steps.size() == 2);
  CHECK(v.manifest.steps[0].dropped == 0);
}

TEST_CASE("13 recipes give 13 distinct manifests and are deterministic") {
  const auto bundle = synthetic::generate();
  const auto task = TaskSpec::multiclass(bundle.corpus.catalog);
  const auto train = from_corpus(bundle.corpus);
  Resources res;
  res.lexicons = bundle.lexicons;
  res.store = bundle.store;
  res.mt = std::make_shared<TableMtClient>("en", bundle.mt_table);
  std::set<std::string> manifests, digests;
  for (const auto& recipe : builtin_recipes()) {
    const auto a = build_variant(train, task, recipe, 3, res);
    const auto b = build_variant(train, task, recipe, 3, res);
    CHECK(a.manifest.to_json() == b.manifest.to_json());
    CHECK(a.dataset == b.dataset);
    manifests.insert(a.manifest.to_json());
    digests.insert(a.manifest.dataset_digest);
    for (const auto& e : a.dataset) {
      if (e.origin == Origin::kAugmented) CHECK(e.sentence.satisfies_any());
    }
  }
  CHECK(manifests.size() == 13);
  CHECK(digests.size() == 13);
}

TEST_CASE("missing resources name the step") {
  const auto task = multiclass();
  const auto d = with_counts({{"other", 5}, {"PO1", 2}});
  CHECK_THROWS_WITH_AS(build_variant(d, task, find_recipe("SR+RUOS"), 1, {}),
                       doctest::Contains("recipe SR+RUOS, step 1"), ValidationError);
  CHECK_THROWS_WITH_AS(build_variant(d, task, find_recipe("ER"), 1, {}),
                       doctest::Contains("step 1"), ValidationError);
  CHECK_THROWS_AS(build_variant(d, task, find_recipe("BT"), 1, {}), ValidationError);
}

}  // TEST_SUITE
