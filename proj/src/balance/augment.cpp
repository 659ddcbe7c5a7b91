#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "dpacheck/balance.hpp"
#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/preprocess.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::balance {

using corpus::Sentence;
using preprocess::Token;

namespace {

constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "about", "above", "after", "all",   "also",  "an",    "and",   "any",   "are",
    "as",    "at",    "be",    "been",  "being", "both",  "but",   "by",    "can",   "could",
    "do",    "does",  "each",  "for",   "from",  "had",   "has",   "have",  "if",    "in",
    "into",  "is",    "it",    "its",   "may",   "might", "must",  "no",    "nor",   "not",
    "of",    "on",    "only",  "or",    "other", "our",   "shall", "should", "so",   "such",
    "than",  "that",  "the",   "their", "then",  "there", "these", "this",  "those", "to",
    "under", "which", "will",  "with"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Keeps an initial capital when the original word had one.
std::string match_case(std::string_view original, std::string replacement) {
  if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) &&
      !replacement.empty()) {
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  }
  return replacement;
}

std::uint64_t sentence_key(const Sentence& s) {
  return content_hash(s.text) ^ splitmix64(fnv1a64(s.dpa_id) + s.sentence_index);
}

// Replaces token spans of the original text, preserving its spacing.
std::string splice(const std::string& text, const std::vector<Token>& tokens,
                   const std::map<std::size_t, std::string>& replacements) {
  std::string out;
  std::size_t copied = 0;
  for (const auto& [pos, word] : replacements) {
    const auto& t = tokens[pos];
    out.append(text, copied, t.begin - copied);
    out += word;
    copied = t.end;
  }
  out.append(text, copied, std::string::npos);
  return out;
}

AugmentedSentence variant(const Sentence& base, std::string text, AugmentMethod method,
                          std::string params) {
  AugmentedSentence a{base, std::move(text), method, std::move(params), false};
  a.identity = a.text == base.text;
  return a;
}

}  // namespace

bool is_content_word(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return false;
  }
  const auto l = lower(token);
  return std::find(kStopwords.begin(), kStopwords.end(), l) == kStopwords.end();
}

SynonymLexicon parse_lexicon(std::istream& in, const std::string& source_name) {
  SynonymLexicon lex;
  lex.source_name = source_name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source_name, line_no, "expected word<TAB>synonyms");
    const auto word = lower(line.substr(0, tab));
    std::vector<std::string> synonyms;
    std::string rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      auto syn = rest.substr(start, comma - start);
      syn.erase(0, syn.find_first_not_of(' '));
      syn.erase(syn.find_last_not_of(' ') + 1);
      if (!syn.empty() && lower(syn) != word &&
          std::find(synonyms.begin(), synonyms.end(), syn) == synonyms.end()) {
        synonyms.push_back(syn);
      }
      start = comma + 1;
    }
    if (word.empty() || synonyms.empty()) {
      throw ParseError(source_name, line_no, "entry '" + word + "' has no synonym other than itself");
    }
    auto& slot = lex.entries[word];
    for (auto& s : synonyms) {
      if (std::find(slot.begin(), slot.end(), s) == slot.end()) slot.push_back(std::move(s));
    }
  }
  if (lex.entries.empty()) throw ValidationError("lexicon " + source_name + " is empty");
  return lex;
}

SynonymLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open lexicon " + path);
  return parse_lexicon(in, path);
}

AugmentResult augment_synonym(std::span<const Sentence> positives,
                              const std::vector<SynonymLexicon>& lexicons, std::uint64_t seed,
                              std::size_t max_replacements) {
  if (lexicons.empty()) throw ValidationError("synonym replacement needs at least one lexicon");
  AugmentResult result;
  for (const auto& s : positives) {
    const auto tokens = preprocess::tokenize(s.text);
    for (std::size_t li = 0; li < lexicons.size(); ++li) {
      const auto& lex = lexicons[li];
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (is_content_word(tokens[i].text) && lex.entries.count(lower(tokens[i].text))) {
          eligible.push_back(i);
        }
      }
      if (eligible.empty()) {
        ++result.dropped;
        continue;
      }
      Rng rng(derive_seed(seed, sentence_key(s), "SR#" + std::to_string(li)));
      std::map<std::size_t, std::string> replacements;
      const auto picks = rng.sample_without_replacement(
          eligible.size(), std::min(max_replacements, eligible.size()));
      for (auto p : picks) {
        const auto& tok = tokens[eligible[p]];
        const auto& options = lex.entries.at(lower(tok.text));
        replacements[eligible[p]] = match_case(tok.text, options[rng.index(options.size())]);
      }
      std::string params = lex.source_name + ":";
      for (const auto& [pos, w] : replacements) params += " " + tokens[pos].text + "->" + w;
      result.variants.push_back(
          variant(s, splice(s.text, tokens, replacements), AugmentMethod::kSynonym, params));
    }
  }
  return result;
}

AugmentResult augment_embedding(std::span<const Sentence> positives,
                                const embedding::EmbeddingStore& store,
                                std::size_t variants_per_sentence, std::uint64_t seed) {
  if (!store.has_vocabulary()) {
    throw CapabilityError("embedding replacement needs a store with a vocabulary section");
  }
  AugmentResult result;
  for (const auto& s : positives) {
    const auto tokens = preprocess::tokenize(s.text);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (is_content_word(tokens[i].text) && store.word_vector(lower(tokens[i].text))) {
        eligible.push_back(i);
      }
    }
    if (eligible.empty()) {
      result.dropped += variants_per_sentence;
      continue;
    }
    // Variants walk a seeded permutation of the eligible words so that they
    // replace different words whenever there are enough of them.
    Rng order(derive_seed(seed, sentence_key(s), "ER"));
    auto perm = order.sample_without_replacement(eligible.size(), eligible.size());
    for (std::size_t v = 0; v < variants_per_sentence; ++v) {
      const auto pos = eligible[perm[v % perm.size()]];
      const auto word = lower(tokens[pos].text);
      const auto nn = embedding::nearest_words(store, *store.word_vector(word), 1, {word});
      if (nn.empty()) {
        ++result.dropped;
        continue;
      }
      std::map<std::size_t, std::string> replacement{{pos, match_case(tokens[pos].text, nn[0].word)}};
      result.variants.push_back(variant(s, splice(s.text, tokens, replacement),
                                        AugmentMethod::kEmbedding,
                                        tokens[pos].text + "->" + nn[0].word));
    }
  }
  return result;
}

std::vector<std::string> content_vocabulary(std::span<const Sentence> sentences) {
  std::set<std::string> words;
  for (const auto& s : sentences) {
    for (const auto& t : preprocess::tokenize(s.text)) {
      if (is_content_word(t.text)) words.insert(lower(t.text));
    }
  }
  return {words.begin(), words.end()};
}

namespace {

AugmentMethod noise_method(NoiseOp op) {
  switch (op) {
    case NoiseOp::kSwap: return AugmentMethod::kNoiseSwap;
    case NoiseOp::kDelete: return AugmentMethod::kNoiseDelete;
    case NoiseOp::kSubstitute: return AugmentMethod::kNoiseSubstitute;
    case NoiseOp::kCrop: return AugmentMethod::kNoiseCrop;
  }
  return AugmentMethod::kNoiseSwap;
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace

AugmentResult augment_noise(std::span<const Sentence> positives, std::span<const NoiseOp> ops,
                            const std::vector<std::string>& vocabulary, std::uint64_t seed,
                            const NoiseConfig& config) {
  AugmentResult result;
  for (const auto& s : positives) {
    const auto words = preprocess::token_texts(preprocess::tokenize(s.text));
    const std::size_t n = words.size();
    for (auto op : ops) {
      const auto method = noise_method(op);
      if (n < config.min_tokens || n < 2) {
        ++result.dropped;
        continue;
      }
      Rng rng(derive_seed(seed, sentence_key(s), method_name(method)));
      std::vector<std::string> out;
      std::string params;
      switch (op) {
        case NoiseOp::kSwap: {
          const auto pick = rng.sample_without_replacement(n, 2);
          out = words;
          std::swap(out[pick[0]], out[pick[1]]);
          params = std::to_string(std::min(pick[0], pick[1])) + "<->" +
                   std::to_string(std::max(pick[0], pick[1]));
          break;
        }
        case NoiseOp::kDelete: {
          const auto k = std::min(n - 1, std::max<std::size_t>(1, ceil_fraction(config.delete_fraction, n)));
          auto pick = rng.sample_without_replacement(n, k);
          std::sort(pick.begin(), pick.end());
          for (std::size_t i = 0, j = 0; i < n; ++i) {
            if (j < pick.size() && pick[j] == i) {
              ++j;
              continue;
            }
            out.push_back(words[i]);
          }
          params = "deleted " + std::to_string(k);
          break;
        }
        case NoiseOp::kSubstitute: {
          if (vocabulary.empty()) {
            ++result.dropped;
            continue;
          }
          const auto k = std::max<std::size_t>(1, ceil_fraction(config.substitute_fraction, n));
          auto pick = rng.sample_without_replacement(n, std::min(k, n));
          std::sort(pick.begin(), pick.end());
          out = words;
          for (auto p : pick) {
            std::string w = vocabulary[rng.index(vocabulary.size())];
            // One redraw when the draw reproduces the original word.
            if (lower(w) == lower(out[p]) && vocabulary.size() > 1) {
              w = vocabulary[rng.index(vocabulary.size())];
            }
            out[p] = w;
          }
          params = "substituted " + std::to_string(pick.size());
          break;
        }
        case NoiseOp::kCrop: {
          const auto keep = std::max<std::size_t>(1, ceil_fraction(config.crop_keep, n));
          if (keep >= n) {
            out = words;
            params = "window covers sentence";
            break;
          }
          const auto start = rng.index(n - keep + 1);
          out.assign(words.begin() + static_cast<std::ptrdiff_t>(start),
                     words.begin() + static_cast<std::ptrdiff_t>(start + keep));
          params = "window " + std::to_string(start) + "+" + std::to_string(keep);
          break;
        }
      }
      AugmentedSentence a{s, {}, method, params, out == words};
      a.text = a.identity ? s.text : preprocess::detokenize(out);
      result.variants.push_back(std::move(a));
    }
  }
  return result;
}

std::string TableMtClient::translate(const std::string& text, const std::string&,
                                     const std::string& dst) {
  if (dst != source_) return text;
  const auto tokens = preprocess::tokenize(text);
  std::map<std::size_t, std::string> replacements;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = table_.find(lower(tokens[i].text));
    if (it != table_.end()) replacements[i] = match_case(tokens[i].text, it->second);
  }
  return splice(text, tokens, replacements);
}

HttpMtClient::HttpMtClient(std::string endpoint) {
  const std::string scheme = "http://";
  if (endpoint.rfind(scheme, 0) != 0) {
    throw ValidationError("MT endpoint must start with http://, got " + endpoint);
  }
  const auto rest = endpoint.substr(scheme.size());
  const auto slash = rest.find('/');
  host_ = scheme + rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
}

std::string HttpMtClient::translate(const std::string& text, const std::string& src,
                                    const std::string& dst) {
  httplib::Client client(host_);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  const auto body = nlohmann::json{{"text", text}, {"src", src}, {"dst", dst}}.dump();
  auto res = client.Post(path_, body, "application/json");
  if (!res) throw ServiceError("translation service unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ServiceError("translation service returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(std::string("malformed translation reply: ") + e.what());
  }
}

AugmentResult augment_backtranslate(std::span<const Sentence> positives, MtClient& mt,
                                    const std::vector<std::string>& pivots,
                                    const std::string& source_language, double max_failure_rate) {
  AugmentResult result;
  std::size_t attempts = 0;
  for (const auto& s : positives) {
    for (const auto& pivot : pivots) {
      ++attempts;
      try {
        const auto there = mt.translate(s.text, source_language, pivot);
        auto back = mt.translate(there, pivot, source_language);
        if (back.find_first_not_of(" \t\r\n") == std::string::npos) {
          ++result.dropped;
          continue;
        }
        result.variants.push_back(variant(s, std::move(back), AugmentMethod::kBackTranslation,
                                          source_language + "->" + pivot + "->" + source_language));
      } catch (const ServiceError& e) {
        ++result.failures;
        result.errors.push_back(s.dpa_id + "#" + std::to_string(s.sentence_index) + " via " +
                                pivot + ": " + e.what());
      }
    }
  }
  if (attempts > 0 &&
      static_cast<double>(result.failures) > max_failure_rate * static_cast<double>(attempts)) {
    throw ServiceError("back-translation aborted: " + std::to_string(result.failures) + " of " +
                       std::to_string(attempts) + " requests failed");
  }
  return result;
}

}  // namespace dpacheck::balance
