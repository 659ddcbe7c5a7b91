#include "dpacheck/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::synthetic {

using corpus::ProvisionId;
using corpus::Sentence;

namespace {

struct ProvisionText {
  const char* title;
  std::vector<const char*> phrases;  // "{C}" is the controller
};

const std::vector<ProvisionText>& provision_texts() {
  static const std::vector<ProvisionText> texts = {
      {"Process personal data only on documented instructions",
       {"process personal data only on documented instructions from {C}",
        "act solely upon the written instructions of {C} when handling personal data"}},
      {"Inform the controller of infringing instructions",
       {"immediately inform {C} if, in its opinion, an instruction infringes applicable data protection law",
        "alert {C} promptly where it considers that an instruction breaches data protection legislation"}},
      {"Confidentiality of authorised persons",
       {"ensure that persons authorised to process personal data have committed themselves to confidentiality",
        "bind all staff with access to personal data by appropriate confidentiality undertakings"}},
      {"Security of processing measures",
       {"implement appropriate technical and organisational measures to ensure a level of security appropriate to the risk",
        "maintain encryption, access controls and other technical safeguards protecting personal data"}},
      {"Prior authorisation for engaging sub-processors",
       {"not engage another processor without the prior specific or general written authorisation of {C}",
        "obtain the written consent of {C} before appointing any sub-processor"}},
      {"Flow-down of obligations to sub-processors",
       {"impose on each sub-processor the same data protection obligations as set out in this Agreement",
        "ensure that every subcontractor is bound by a written contract containing equivalent data protection terms"}},
      {"Liability for sub-processors",
       {"remain fully liable to {C} for the performance of the obligations of any sub-processor",
        "be responsible towards {C} for any failure of its subcontractors to fulfil their obligations"}},
      {"Assistance with data subject requests",
       {"assist {C} by appropriate measures in responding to requests from data subjects exercising their rights",
        "help {C} answer data subject requests for access, rectification or erasure"}},
      {"Assistance with security obligations",
       {"assist {C} in ensuring compliance with the obligations on the security of processing",
        "support {C} in meeting its duties regarding security of processing"}},
      {"Notification of personal data breaches",
       {"notify {C} without undue delay after becoming aware of a personal data breach",
        "inform {C} of any security incident affecting personal data within 48 hours"}},
      {"Assistance with breach notifications",
       {"assist {C} in notifying personal data breaches to the supervisory authority and to affected data subjects",
        "provide {C} with the information needed for breach notifications to regulators and individuals"}},
      {"Assistance with impact assessments",
       {"assist {C} with data protection impact assessments and prior consultations with the supervisory authority",
        "support {C} in carrying out impact assessments and consulting the regulator beforehand"}},
      {"Deletion or return of data at the end of services",
       {"at the choice of {C}, delete or return all personal data after the end of the provision of services",
        "return or destroy all personal data upon termination of the services as instructed by {C}"}},
      {"Deletion of existing copies",
       {"delete existing copies of personal data unless Union or Member State law requires their storage",
        "erase all remaining copies of the data unless retention is mandated by law"}},
      {"Information to demonstrate compliance",
       {"make available to {C} all information necessary to demonstrate compliance with its obligations",
        "provide {C} with documentation demonstrating compliance with this Agreement on request"}},
      {"Audits and inspections",
       {"allow for and contribute to audits, including inspections, conducted by {C} or an auditor mandated by {C}",
        "permit {C} or its appointed auditor to carry out audits and on-site inspections"}},
      {"Transfers to third countries",
       {"not transfer personal data to a third country or an international organisation except on documented instructions from {C}",
        "refrain from transferring personal data outside the European Economic Area without the authorisation of {C}"}},
      {"Records of processing activities",
       {"maintain a written record of all categories of processing activities carried out on behalf of {C}",
        "keep records of processing activities performed for {C}"}},
      {"Cooperation with the supervisory authority",
       {"cooperate, on request, with the supervisory authority in the performance of its tasks",
        "cooperate with any competent data protection authority upon its request"}},
  };
  return texts;
}

const std::vector<const char*> kOtherTemplates = {
    "This Agreement shall be governed by the laws of {X}.",
    "Each party shall bear its own costs in connection with the negotiation of this Agreement.",
    "The term of this Agreement shall commence on the Effective Date and continue for {N} years.",
    "Capitalised terms not defined herein have the meanings given in the Main Agreement.",
    "Any notice under this Agreement shall be given in writing to the addresses listed in Schedule {N}.",
    "The fees payable by {C} are set out in the commercial terms.",
    "If any provision of this Agreement is held invalid, the remaining provisions shall remain in full force.",
    "This Agreement may be executed in counterparts, each of which is deemed an original.",
    "{P} provides hosting and support services to {C} as described in the Main Agreement.",
    "Headings are for convenience only and do not affect interpretation.",
    "No amendment to this Agreement is effective unless agreed in writing by both parties.",
    "The parties shall attempt in good faith to resolve any dispute arising out of this Agreement.",
    "Annex {N} describes the categories of data subjects and the types of personal data.",
    "Neither party may assign this Agreement without the consent of the other party.",
};

const std::vector<const char*> kLeads = {"", "", "Where applicable, ", "In accordance with Section {S}, ",
                                         "During the term of this Agreement, ",
                                         "To the extent required by law, "};
const std::vector<const char*> kTails = {"", "", " at all times", " as further described in Annex {N}",
                                         " at its own cost"};
const std::vector<const char*> kCountries = {"Luxembourg", "Germany", "France", "Ireland", "Belgium"};
const std::vector<std::pair<const char*, const char*>> kParties = {
    {"the Supplier", "the Customer"},
    {"the Service Provider", "the Client"},
    {"the Vendor", "the Company"},
};

const std::vector<std::pair<const char*, const char*>> kLexiconA = {
    {"data", "information"},       {"personal", "private"},      {"delete", "erase,remove"},
    {"ensure", "guarantee"},       {"assist", "help,aid"},       {"notify", "inform"},
    {"maintain", "keep"},          {"appropriate", "suitable"},  {"obligations", "duties"},
    {"records", "logs"},           {"requests", "demands"},      {"audits", "reviews"},
    {"security", "safety"},        {"processing", "handling"},   {"authorisation", "approval"},
    {"process", "handle"},         {"provide", "supply"},        {"compliance", "conformity"},
    {"transfer", "move"},          {"information", "details"},   {"written", "documented"},
    {"law", "legislation"},        {"measures", "steps"},        {"support", "assist"},
    {"cooperate", "collaborate"},  {"authority", "regulator"},   {"agreement", "contract"},
    {"services", "work"},          {"parties", "sides"},         {"costs", "expenses"},
};
const std::vector<std::pair<const char*, const char*>> kLexiconB = {
    {"data", "details"},           {"personal", "individual"},   {"delete", "wipe"},
    {"ensure", "secure"},          {"assist", "support"},        {"notify", "tell"},
    {"maintain", "uphold"},        {"obligations", "commitments"}, {"records", "registers"},
    {"requests", "queries"},       {"audits", "checks"},         {"security", "protection"},
    {"processing", "treatment"},   {"instructions", "directions"}, {"provide", "give"},
    {"compliance", "adherence"},   {"transfer", "send"},         {"information", "material"},
    {"law", "statute"},            {"measures", "controls"},     {"support", "back"},
    {"authority", "agency"},       {"agreement", "arrangement"}, {"services", "offerings"},
    {"parties", "signatories"},    {"terms", "conditions"},      {"inspections", "visits"},
    {"written", "recorded"},       {"authorisation", "permission"}, {"consent", "permission"},
};
const std::vector<std::pair<const char*, const char*>> kMtTable = {
    {"delete", "remove"}, {"ensure", "make sure"}, {"assist", "support"},
    {"notify", "inform"}, {"immediately", "at once"}, {"shall", "will"},
};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.index(items.size())];
}

std::string fill(std::string text, Rng& rng, std::size_t party, std::size_t section) {
  const auto& [p, c] = kParties[party];
  text = replace_all(std::move(text), "{P}", p);
  text = replace_all(std::move(text), "{C}", c);
  text = replace_all(std::move(text), "{X}", pick(kCountries, rng));
  text = replace_all(std::move(text), "{N}", std::to_string(1 + rng.index(6)));
  text = replace_all(std::move(text), "{S}", std::to_string(section / 10 + 1) + "." + std::to_string(section % 10 + 1));
  return capitalize(std::move(text));
}

std::string positive_text(std::size_t provision, Rng& rng, std::size_t party, std::size_t section) {
  const auto& t = provision_texts()[provision];
  std::string s = std::string(pick(kLeads, rng)) + "{P} shall " + pick(t.phrases, rng) +
                  pick(kTails, rng) + ".";
  return fill(s, rng, party, section);
}

std::string other_text(Rng& rng, std::size_t party, std::size_t section) {
  return fill(pick(kOtherTemplates, rng), rng, party, section);
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : preprocess::tokenize(text)) {
    if (std::all_of(t.text.begin(), t.text.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); })) {
      out.push_back(lower(t.text));
    }
  }
  return out;
}

preprocess::AliasTable alias_table() {
  std::vector<preprocess::AliasEntry> entries;
  for (const auto& [p, c] : kParties) {
    entries.push_back({p, preprocess::Role::kProcessor});
    entries.push_back({c, preprocess::Role::kController});
  }
  return preprocess::AliasTable(std::move(entries));
}

balance::SynonymLexicon make_lexicon(const std::string& name,
                                     const std::vector<std::pair<const char*, const char*>>& rows) {
  std::ostringstream text;
  for (const auto& [w, s] : rows) text << w << '\t' << s << '\n';
  std::istringstream in(text.str());
  return balance::parse_lexicon(in, name);
}

// Word vectors: a template word sits at the mean centroid of the classes
// whose templates use it; filler words (leads, tails, party names) get small
// random vectors; synonyms sit next to the word they replace.
void build_vocabulary(embedding::EmbeddingStore& store, const SyntheticSpec& spec,
                      const std::vector<balance::SynonymLexicon>& lexicons) {
  const std::size_t other_class = provision_texts().size();
  constexpr std::size_t kShared = static_cast<std::size_t>(-1);
  std::map<std::string, std::set<std::size_t>> usage;
  const auto normalized_words = [](std::string text) {
    for (const auto& [p, c] : kParties) {
      text = replace_all(std::move(text), "{P}", p);
      text = replace_all(std::move(text), "{C}", c);
    }
    return words_of(preprocess::normalize(text, alias_table()).text);
  };
  for (std::size_t k = 0; k < provision_texts().size(); ++k) {
    for (const auto* phrase : provision_texts()[k].phrases) {
      for (const auto& w : normalized_words(phrase)) usage[w].insert(k);
    }
  }
  for (const auto* t : kOtherTemplates) {
    for (const auto& w : normalized_words(t)) usage[w].insert(other_class);
  }
  std::vector<const char*> shared(kLeads.begin(), kLeads.end());
  shared.insert(shared.end(), kTails.begin(), kTails.end());
  shared.insert(shared.end(), kCountries.begin(), kCountries.end());
  shared.push_back("{P} shall {C}");
  for (const auto* t : shared) {
    for (const auto& w : normalized_words(t)) usage[w].insert(kShared);
  }

  std::vector<std::vector<double>> centroids;
  for (std::size_t k = 0; k <= other_class; ++k) {
    Rng rng(derive_seed(spec.seed, k, "centroid"));
    std::vector<double> c(spec.dim);
    double norm = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm += v * v;
    }
    for (auto& v : c) v *= spec.centroid_scale / std::sqrt(norm);
    centroids.push_back(std::move(c));
  }
  const double word_noise = 0.05;
  for (const auto& [word, classes] : usage) {
    Rng rng(derive_seed(spec.seed, fnv1a64(word), "word"));
    embedding::EmbeddingVector v(spec.dim);
    const bool shared = classes.count(kShared) > 0;
    for (std::size_t i = 0; i < spec.dim; ++i) {
      double x = 0.0;
      if (!shared) {
        for (auto k : classes) x += centroids[k][i];
        x /= static_cast<double>(classes.size());
      }
      v[i] = static_cast<float>(x + word_noise * rng.normal());
    }
    store.add_word(word, std::move(v));
  }
  for (const auto& lex : lexicons) {
    for (const auto& [word, synonyms] : lex.entries) {
      const auto* base = store.word_vector(word);
      if (!base) continue;
      for (const auto& syn : synonyms) {
        const auto s = lower(syn);
        if (s.find(' ') != std::string::npos || store.word_vector(s)) continue;
        Rng rng(derive_seed(spec.seed, fnv1a64(s), "synonym"));
        embedding::EmbeddingVector v(*base);
        for (auto& x : v) x += static_cast<float>(0.01 * rng.normal());
        store.add_word(s, std::move(v));
      }
    }
  }
}

// Stores the sentence vector (word mean plus jitter) and its token sequence
// under the normalized text, unless already present.
void embed_sentence(SyntheticBundle& b, const Sentence& s) {
  const auto normalized = preprocess::normalize(s.text, b.aliases).text;
  const auto hash = content_hash(normalized);
  if (b.store->find(hash)) return;
  auto v = embedding::mean_word_vector(*b.store, normalized);
  if (!v) throw ValidationError("synthetic sentence has no vocabulary words: " + s.text);
  Rng rng(derive_seed(b.spec.seed, hash, "jitter"));
  for (auto& x : *v) x += static_cast<float>(b.spec.noise * rng.normal());
  b.store->add(hash, std::move(*v));
  std::vector<embedding::EmbeddingVector> seq;
  for (const auto& w : words_of(normalized)) {
    if (const auto* wv = b.store->word_vector(w)) seq.push_back(*wv);
  }
  b.store->add_tokens(hash, std::move(seq));
}

}  // namespace

corpus::ProvisionCatalog processor_catalog() {
  std::vector<corpus::Provision> provisions;
  for (std::size_t k = 0; k < provision_texts().size(); ++k) {
    const auto& t = provision_texts()[k];
    provisions.push_back({ProvisionId("PO" + std::to_string(k + 1)), t.title,
                          "The processor shall " +
                              replace_all(t.phrases[0], "{C}", "the controller") + "."});
  }
  return corpus::ProvisionCatalog("GDPR Art. 28 processor obligations", std::move(provisions));
}

namespace {

corpus::Dpa make_dpa(SyntheticBundle& b, const std::string& id, std::uint64_t seed,
                     const std::vector<ProvisionId>& missing, std::size_t n_sentences,
                     std::size_t n_other) {
  Rng rng(seed);
  const auto party = rng.index(kParties.size());
  const auto& catalog = b.corpus.catalog;
  std::vector<std::pair<std::string, std::optional<std::size_t>>> drafts;
  std::vector<std::size_t> present;
  for (std::size_t k = 0; k < catalog.size(); ++k) {
    if (std::find(missing.begin(), missing.end(), catalog.at(k).id) == missing.end()) {
      present.push_back(k);
    }
  }
  std::size_t section = 0;
  for (auto k : present) {
    const std::size_t copies = n_sentences == 0 && rng.uniform() < 0.4 ? 2 : 1;
    for (std::size_t c = 0; c < copies; ++c) drafts.push_back({positive_text(k, rng, party, section++), k});
  }
  if (n_sentences > 0) {
    if (drafts.size() > n_sentences) drafts.resize(n_sentences);
    while (drafts.size() < n_sentences) {
      if (!present.empty() && rng.uniform() < 0.3) {
        const auto k = pick(present, rng);
        drafts.push_back({positive_text(k, rng, party, section++), k});
      } else {
        drafts.push_back({other_text(rng, party, section++), std::nullopt});
      }
    }
  } else {
    for (std::size_t i = 0; i < n_other; ++i) drafts.push_back({other_text(rng, party, section++), std::nullopt});
  }
  rng.shuffle(std::span(drafts));

  corpus::Dpa dpa{id, {}};
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    Sentence s{id, i, drafts[i].first, {}};
    if (drafts[i].second) s.gold_labels.push_back(catalog.at(*drafts[i].second).id);
    embed_sentence(b, s);
    dpa.sentences.push_back(std::move(s));
  }
  return dpa;
}

}  // namespace

SyntheticBundle generate(const SyntheticSpec& spec) {
  if (spec.dim == 0 || spec.n_dpas == 0) throw ValidationError("synthetic corpus needs dim and DPAs");
  SyntheticBundle b;
  b.spec = spec;
  b.corpus.catalog = processor_catalog();
  b.corpus.provenance = "synthetic corpus, seed " + std::to_string(spec.seed);
  b.aliases = alias_table();
  b.lexicons = {make_lexicon("lexicon_a", kLexiconA), make_lexicon("lexicon_b", kLexiconB)};
  for (const auto& [w, r] : kMtTable) b.mt_table[w] = r;
  b.store = std::make_shared<embedding::EmbeddingStore>(spec.dim, "synthetic-bow-" + std::to_string(spec.dim));
  build_vocabulary(*b.store, spec, b.lexicons);

  const auto m = b.corpus.catalog.size();
  for (std::size_t d = 0; d < spec.n_dpas; ++d) {
    char id[16];
    std::snprintf(id, sizeof id, "DPA-%02zu", d + 1);
    // Every other DPA leaves out one or two provisions.
    std::vector<ProvisionId> missing;
    if (d % 2 == 1) {
      missing.push_back(b.corpus.catalog.at((d * 5) % m).id);
      const auto second = (d * 11 + 3) % m;
      if (d % 4 == 3 && b.corpus.catalog.at(second).id != missing[0]) {
        missing.push_back(b.corpus.catalog.at(second).id);
      }
    }
    std::sort(missing.begin(), missing.end(), [&](const auto& x, const auto& y) {
      return b.corpus.catalog.index_of(x) < b.corpus.catalog.index_of(y);
    });
    b.planted_missing[id] = missing;
    b.corpus.dpas.push_back(make_dpa(b, id, derive_seed(spec.seed, d, "dpa"), missing, 0, spec.other_per_dpa));
  }
  b.corpus.validate();
  return b;
}

corpus::Dpa generate_dpa(SyntheticBundle& bundle, const std::string& dpa_id,
                         std::size_t n_sentences, std::uint64_t seed,
                         const std::vector<ProvisionId>& missing) {
  if (n_sentences == 0) throw ValidationError("a DPA needs at least one sentence");
  return make_dpa(bundle, dpa_id, seed, missing, n_sentences, 0);
}

std::vector<Sentence> positive_sentences(std::size_t n, std::uint64_t seed) {
  const auto catalog = processor_catalog();
  std::vector<Sentence> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = i % catalog.size();
    out.push_back({"POS", i, positive_text(k, rng, rng.index(kParties.size()), i), {catalog.at(k).id}});
  }
  return out;
}

void write_bundle(const SyntheticBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  open("catalog.json") << corpus::catalog_to_json(b.corpus.catalog);
  {
    auto out = open("ground_truth.jsonl");
    corpus::write_ground_truth(b.corpus, out);
  }
  {
    auto out = open("aliases.tsv");
    out << "# party names used by the synthetic DPAs\n";
    for (const auto& e : b.aliases.entries()) out << e.pattern << '\t' << preprocess::role_name(e.replacement) << '\n';
  }
  for (const auto& lex : b.lexicons) {
    auto out = open(lex.source_name + ".tsv");
    for (const auto& [w, syns] : lex.entries) {
      out << w << '\t';
      for (std::size_t i = 0; i < syns.size(); ++i) out << (i ? "," : "") << syns[i];
      out << '\n';
    }
  }
  {
    auto out = open("mt_table.tsv");
    for (const auto& [w, r] : b.mt_table) out << w << '\t' << r << '\n';
  }
  {
    auto out = open("planted_missing.tsv");
    for (const auto& [id, missing] : b.planted_missing) {
      out << id << '\t';
      for (std::size_t i = 0; i < missing.size(); ++i) out << (i ? "," : "") << missing[i].str();
      out << '\n';
    }
  }
  embedding::save_store(*b.store, (fs::path(dir) / "store.bin").string());
}

}  // namespace dpacheck::synthetic
