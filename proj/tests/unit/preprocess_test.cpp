#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "dpacheck/errors.hpp"
#include "dpacheck/preprocess.hpp"
#include "dpacheck/random.hpp"

using namespace dpacheck;
using namespace dpacheck::preprocess;

namespace {

std::vector<std::string> words(std::string_view text) { return token_texts(tokenize(text)); }

std::string non_space(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  std::sort(out.begin(), out.end());
  return out;
}

AliasTable table(std::initializer_list<std::pair<const char*, Role>> e) {
  std::vector<AliasEntry> v;
  for (const auto& [p, r] : e) v.push_back({p, r});
  return AliasTable(std::move(v));
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("tokenize basics") {
  using V = std::vector<std::string>;
  CHECK(words("The processor shall.") == V{"The", "processor", "shall", "."});
  CHECK(words("").empty());
  CHECK(words("   ").empty());
  CHECK(words("data-set (v2).") == V{"data-set", "(", "v2", ")", "."});
  CHECK(words("it's 1,000.50 EUR") == V{"it's", "1,000.50", "EUR"});
  CHECK(words("end- of") == V{"end", "-", "of"});
  CHECK(words("Zürich GmbH") == V{"Zürich", "GmbH"});
}

TEST_CASE("token offsets reproduce the input") {
  const std::string text = "  Art. 28(3), the  processor-side; \"shall\" act!";
  const auto toks = tokenize(text);
  std::size_t prev = 0;
  std::string rebuilt;
  for (const auto& t : toks) {
    CHECK(t.end > t.begin);
    CHECK(t.begin >= prev);
    rebuilt += text.substr(prev, t.begin - prev) + t.text;
    CHECK(text.substr(t.begin, t.end - t.begin) == t.text);
    prev = t.end;
  }
  rebuilt += text.substr(prev);
  CHECK(rebuilt == text);
}

TEST_CASE("tokenize is idempotent on token texts") {
  for (const auto& t : tokenize("Sub-processors (e.g. cloud hosts) must, at 2.5% cost; comply?")) {
    const auto again = words(t.text);
    REQUIRE(again.size() == 1);
    CHECK(again[0] == t.text);
  }
}

TEST_CASE("detokenize attaches punctuation") {
  CHECK(detokenize({"The", "processor", "(", "PO", ")", "shall", "."}) == "The processor (PO) shall.");
  CHECK(detokenize({}).empty());
}

TEST_CASE("split sentences") {
  using V = std::vector<std::string>;
  CHECK(split_sentences("The processor shall: encrypt data.") ==
        V{"The processor shall:", "encrypt data."});
  CHECK(split_sentences("One.") == V{"One."});
  CHECK(split_sentences("A. B? C!") == V{"A.", "B?", "C!"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("  \n ").empty());
}

TEST_CASE("abbreviations and initials do not end a segment") {
  CHECK(split_sentences("See Art. 28 of the GDPR.").size() == 1);
  CHECK(split_sentences("Processors, e.g. hosts, i.e. vendors, comply.").size() == 1);
  CHECK(split_sentences("Signed by J. Smith today.").size() == 1);
  CHECK(split_sentences("Clause No. 4 applies; nothing else.").size() == 2);
}

TEST_CASE("bullets start a new segment") {
  const auto segs = split_sentences("The processor shall\n- encrypt data\n- log access");
  REQUIRE(segs.size() == 3);
  CHECK(segs[0] == "The processor shall");
}

TEST_CASE("segmentation conserves non-space characters") {
  Rng rng(5);
  const std::vector<std::string> pieces = {"Art.", "shall", ":", ";", "?", "!", "e.g.", "A.",
                                           "\n- ", "data", " ", "  ", "(x)", "1.5", "."};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const auto n = 1 + rng.index(25);
    for (std::size_t i = 0; i < n; ++i) text += pieces[rng.index(pieces.size())] + " ";
    const auto segs = split_sentences(text);
    std::string joined;
    for (const auto& s : segs) {
      CHECK_FALSE(s.empty());
      CHECK(s == std::string(s.data(), s.size()));
      CHECK_FALSE(std::isspace(static_cast<unsigned char>(s.front())));
      CHECK_FALSE(std::isspace(static_cast<unsigned char>(s.back())));
      joined += s;
    }
    CHECK(non_space(joined) == non_space(text));
  }
}

TEST_CASE("normalize replaces aliases") {
  const auto acme = table({{"Acme Corp", Role::kProcessor}});
  CHECK(normalize("Acme Corp shall delete data", acme).text == "PROCESSOR shall delete data");
  const auto imp = table({{"importer", Role::kProcessor}});
  const auto r = normalize("the importer agrees", imp);
  CHECK(r.text == "the PROCESSOR agrees");
  REQUIRE(r.applied.size() == 1);
  CHECK(r.applied[0].matched == "importer");
  CHECK(r.applied[0].begin == 4);
  CHECK(r.applied[0].end == 12);
  const auto none = normalize("nothing here", imp);
  CHECK(none.text == "nothing here");
  CHECK(none.applied.empty());
}

TEST_CASE("matching is case-insensitive, word-bounded and longest first") {
  const auto t = table({{"service provider", Role::kProcessor},
                        {"provider", Role::kController},
                        {"data export*", Role::kController}});
  CHECK(normalize("The Service Provider and the provider", t).text ==
        "The PROCESSOR and the CONTROLLER");
  CHECK(normalize("providers are not matched", t).text == "providers are not matched");
  CHECK(normalize("the Data Exporter agrees", t).text == "the CONTROLLER agrees");
}

TEST_CASE("single-character wildcard") {
  const auto t = table({{"party ?", Role::kController}});
  CHECK(normalize("party A and party BC", t).text == "CONTROLLER and party BC");
}

TEST_CASE("normalize is idempotent and spans are ordered") {
  const auto t = table({{"importer", Role::kProcessor},
                        {"exporter", Role::kController},
                        {"Acme*", Role::kProcessor}});
  const std::string text = "Importer and exporter, AcmeCloud and the importer; Acme.";
  const auto once = normalize(text, t);
  CHECK(normalize(once.text, t).text == once.text);
  for (std::size_t i = 1; i < once.applied.size(); ++i) {
    CHECK(once.applied[i - 1].end <= once.applied[i].begin);
  }
  CHECK(once.applied.size() == 5);
}

TEST_CASE("alias tables reject patterns that break idempotence") {
  CHECK_THROWS_AS(table({{"processor", Role::kProcessor}}), ValidationError);
  CHECK_THROWS_AS(table({{"Contr*", Role::kProcessor}}), ValidationError);
  CHECK_THROWS_AS(table({{"", Role::kProcessor}}), ValidationError);
  CHECK_THROWS_AS(table({{"-acme", Role::kProcessor}}), ValidationError);
}

TEST_CASE("alias file format") {
  std::istringstream ok("# comment\nimporter\tPROCESSOR\ndata exporter\tCONTROLLER\n\n");
  const auto t = parse_alias_table(ok);
  REQUIRE(t.entries().size() == 2);
  CHECK(t.entries()[1].replacement == Role::kController);
  std::istringstream bad("importer\tVENDOR\n");
  CHECK_THROWS_AS(parse_alias_table(bad), ParseError);
}

TEST_CASE("review candidates list uncovered capitalized spans") {
  const auto c = review_candidates({"The Acme Cloud Services shall notify",
                                    "Acme Cloud Services stores data",
                                    "Data Protection Officer contacts PROCESSOR"});
  REQUIRE_FALSE(c.empty());
  CHECK(c[0].first == "Acme Cloud Services");
  CHECK(c[0].second == 2);
}

}  // TEST_SUITE
