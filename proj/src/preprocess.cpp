#include "dpacheck/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>

#include "dpacheck/errors.hpp"

namespace dpacheck::preprocess {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(),
                    [](char x, char y) { return lower(x) == lower(y); });
}

constexpr std::array<std::string_view, 12> kAbbreviations = {
    "art.", "no.", "e.g.", "i.e.", "cf.", "para.", "sec.", "vs.", "nr.", "pp.", "mr.", "ms."};

constexpr std::array<std::string_view, 2> kReplacements = {"PROCESSOR", "CONTROLLER"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_word_char(c)) {
      ++i;
      while (i < n) {
        if (is_word_char(text[i])) {
          ++i;
        } else if (i + 1 < n && (text[i] == '-' || text[i] == '\'') &&
                   is_word_char(text[i + 1])) {
          i += 2;
        } else if (i + 1 < n && (text[i] == '.' || text[i] == ',') &&
                   is_digit(text[i - 1]) && is_digit(text[i + 1])) {
          i += 2;
        } else {
          break;
        }
      }
    } else {
      ++i;
    }
    tokens.push_back({std::string(text.substr(start, i - start)), start, i});
  }
  return tokens;
}

std::vector<std::string> token_texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  static constexpr std::string_view kNoSpaceBefore = ".,;:!?)]}%";
  static constexpr std::string_view kNoSpaceAfter = "([{";
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (i > 0) {
      const bool glue_left = t.size() == 1 && kNoSpaceBefore.find(t[0]) != std::string_view::npos;
      const auto& prev = tokens[i - 1];
      const bool glue_right =
          prev.size() == 1 && kNoSpaceAfter.find(prev[0]) != std::string_view::npos;
      if (!glue_left && !glue_right) out += ' ';
    }
    out += t;
  }
  return out;
}

namespace {

// Length of a bullet marker starting at pos (at the beginning of a line), or 0.
std::size_t bullet_marker(std::string_view text, std::size_t pos) {
  auto followed_by_space = [&](std::size_t end) {
    return end < text.size() && (text[end] == ' ' || text[end] == '\t');
  };
  const std::string_view rest = text.substr(pos);
  for (std::string_view m : {"\xE2\x80\xA2", "\xE2\x80\x93", "\xC2\xB7"}) {
    if (rest.substr(0, m.size()) == m && followed_by_space(pos + m.size())) return m.size();
  }
  if ((rest[0] == '-' || rest[0] == '*') && followed_by_space(pos + 1)) return 1;
  // (a) (iv) (1)
  std::size_t i = 0;
  const bool paren = rest[0] == '(';
  if (paren) ++i;
  const std::size_t label_start = i;
  while (i < rest.size() && i - label_start < 4 &&
         std::isalnum(static_cast<unsigned char>(rest[i]))) {
    ++i;
  }
  if (i == label_start || i >= rest.size()) return 0;
  const bool numeric = std::all_of(rest.begin() + label_start, rest.begin() + i, is_digit);
  const bool short_label = numeric || i - label_start <= 2 ||
                           std::all_of(rest.begin() + label_start, rest.begin() + i,
                                       [](char c) { return std::string_view("ivxlIVXL").find(c) != std::string_view::npos; });
  if (!short_label) return 0;
  if (rest[i] == ')') return followed_by_space(pos + i + 1) ? i + 1 : 0;
  if (!paren && rest[i] == '.' && numeric) return followed_by_space(pos + i + 1) ? i + 1 : 0;
  return 0;
}

bool is_boundary_char(char c) {
  return c == '.' || c == ':' || c == ';' || c == '?' || c == '!';
}

bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> segments;
  std::size_t seg_start = 0;
  auto emit = [&](std::size_t end) {
    auto seg = trim(text.substr(seg_start, end - seg_start));
    if (!seg.empty()) segments.emplace_back(seg);
    seg_start = end;
  };

  const std::size_t n = text.size();
  bool line_start = true;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c == '\n') {
      line_start = true;
      continue;
    }
    if (line_start && (c == ' ' || c == '\t')) continue;
    if (line_start) {
      line_start = false;
      if (std::size_t len = bullet_marker(text, i); len > 0) {
        emit(i);
        i += len - 1;
        continue;
      }
    }
    // Inline bullet glyph.
    if (text.substr(i, 3) == "\xE2\x80\xA2") {
      emit(i);
      i += 2;
      continue;
    }
    if (!is_boundary_char(c)) continue;

    std::size_t end = i + 1;
    while (end < n && (is_boundary_char(text[end]) || is_closer(text[end]))) ++end;
    if (end < n && !is_space(text[end])) continue;

    if (c == '.') {
      // Word immediately before the period.
      std::size_t w = i;
      while (w > seg_start && !is_space(text[w - 1]) && text[w - 1] != '(') --w;
      const std::string_view word = text.substr(w, i + 1 - w);
      const bool abbreviation =
          std::any_of(kAbbreviations.begin(), kAbbreviations.end(),
                      [&](std::string_view a) { return iequals(a, word); });
      const bool first_in_segment = trim(text.substr(seg_start, w - seg_start)).empty();
      const bool initial = word.size() == 2 && is_upper(word[0]) && !first_in_segment;
      if (abbreviation || initial) continue;
    }
    emit(end);
    i = end - 1;
  }
  emit(n);
  return segments;
}

std::string_view role_name(Role role) {
  return role == Role::kProcessor ? kReplacements[0] : kReplacements[1];
}

namespace {

// All end offsets at which pattern[pi..] matches text starting at ti.
void match_ends(std::string_view pattern, std::size_t pi, std::string_view text,
                std::size_t ti, std::vector<std::size_t>& ends) {
  if (pi == pattern.size()) {
    ends.push_back(ti);
    return;
  }
  const char p = pattern[pi];
  if (p == '*') {
    std::size_t t = ti;
    match_ends(pattern, pi + 1, text, t, ends);
    while (t < text.size() && is_word_char(text[t])) {
      ++t;
      match_ends(pattern, pi + 1, text, t, ends);
    }
    return;
  }
  if (ti >= text.size()) return;
  if (p == '?') {
    if (is_word_char(text[ti])) match_ends(pattern, pi + 1, text, ti + 1, ends);
    return;
  }
  if (lower(p) == lower(text[ti])) match_ends(pattern, pi + 1, text, ti + 1, ends);
}

// Longest word-bounded match of pattern at ti, if any.
std::optional<std::size_t> longest_match(std::string_view pattern, std::string_view text,
                                         std::size_t ti) {
  std::vector<std::size_t> ends;
  match_ends(pattern, 0, text, ti, ends);
  std::optional<std::size_t> best;
  for (auto e : ends) {
    if (e == ti) continue;
    if (e < text.size() && is_word_char(text[e])) continue;
    if (!best || e > *best) best = e;
  }
  return best;
}

}  // namespace

AliasTable::AliasTable(std::vector<AliasEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    const auto& p = e.pattern;
    if (p.empty()) throw ValidationError("empty alias pattern");
    auto edge = [](char c) { return is_word_char(c) || c == '*' || c == '?'; };
    if (!edge(p.front()) || !edge(p.back()) ||
        std::none_of(p.begin(), p.end(), is_word_char)) {
      throw ValidationError("alias pattern '" + p +
                            "' must begin and end with a word character or wildcard");
    }
    for (auto r : kReplacements) {
      if (auto end = longest_match(p, r, 0); end && *end == r.size()) {
        throw ValidationError("alias pattern '" + p + "' matches the replacement " +
                              std::string(r));
      }
    }
  }
}

AliasTable parse_alias_table(std::istream& in, const std::string& source) {
  std::vector<AliasEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(source, line_no, "expected pattern<TAB>role");
    const auto pattern = trim(std::string_view(line).substr(0, tab));
    const auto role = trim(std::string_view(line).substr(tab + 1));
    AliasEntry entry{std::string(pattern), Role::kProcessor};
    if (role == "PROCESSOR") {
      entry.replacement = Role::kProcessor;
    } else if (role == "CONTROLLER") {
      entry.replacement = Role::kController;
    } else {
      throw ParseError(source, line_no, "role must be PROCESSOR or CONTROLLER, got '" +
                                            std::string(role) + "'");
    }
    entries.push_back(std::move(entry));
  }
  return AliasTable(std::move(entries));
}

AliasTable load_alias_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open alias table " + path);
  return parse_alias_table(in, path);
}

NormalizedText normalize(std::string_view text, const AliasTable& aliases) {
  // Spans of existing replacement words; matches may not overlap them.
  std::vector<std::pair<std::size_t, std::size_t>> protected_spans;
  for (const auto& tok : tokenize(text)) {
    if (std::find(kReplacements.begin(), kReplacements.end(), tok.text) != kReplacements.end()) {
      protected_spans.emplace_back(tok.begin, tok.end);
    }
  }
  auto overlaps_protected = [&](std::size_t b, std::size_t e) {
    return std::any_of(protected_spans.begin(), protected_spans.end(),
                       [&](const auto& s) { return b < s.second && s.first < e; });
  };

  NormalizedText result;
  std::size_t copied = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool word_start = is_word_char(text[i]) && (i == 0 || !is_word_char(text[i - 1]));
    if (!word_start) {
      ++i;
      continue;
    }
    std::optional<std::size_t> best_end;
    const AliasEntry* best = nullptr;
    for (const auto& entry : aliases.entries()) {
      auto end = longest_match(entry.pattern, text, i);
      if (!end || overlaps_protected(i, *end)) continue;
      if (!best_end || *end > *best_end) {
        best_end = end;
        best = &entry;
      }
    }
    if (!best) {
      ++i;
      continue;
    }
    result.text.append(text.substr(copied, i - copied));
    const auto replacement = role_name(best->replacement);
    result.text.append(replacement);
    result.applied.push_back({best->pattern, std::string(text.substr(i, *best_end - i)),
                              std::string(replacement), i, *best_end});
    i = copied = *best_end;
  }
  result.text.append(text.substr(copied));
  return result;
}

std::vector<std::pair<std::string, std::size_t>> review_candidates(
    const std::vector<std::string>& normalized_sentences) {
  static constexpr std::array<std::string_view, 20> kFunctionWords = {
      "The", "A",  "An", "This", "That", "These", "Those", "Each", "Any", "All",
      "Such", "In", "On", "Of",  "For",  "To",    "If",    "Where", "When", "Upon"};
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : normalized_sentences) {
    const auto tokens = tokenize(sentence);
    std::size_t i = 0;
    while (i < tokens.size()) {
      auto capitalized = [&](std::size_t k) {
        const auto& t = tokens[k].text;
        return is_upper(t[0]) &&
               std::find(kReplacements.begin(), kReplacements.end(), t) == kReplacements.end() &&
               std::find(kFunctionWords.begin(), kFunctionWords.end(), t) == kFunctionWords.end();
      };
      if (!capitalized(i)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < tokens.size() && capitalized(j)) ++j;
      if (j - i >= 2) {
        ++counts[std::string(sentence.substr(tokens[i].begin, tokens[j - 1].end - tokens[i].begin))];
      }
      i = j;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace dpacheck::preprocess
