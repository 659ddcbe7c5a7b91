#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dpacheck::preprocess {

// A token with its byte offsets [begin, end) into the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

// Word characters: ASCII alphanumerics and every non-ASCII byte, so multibyte
// UTF-8 sequences are never split.
bool is_word_char(char c);

// Words are maximal runs of word characters; '-' and '\'' join two word
// characters and '.' or ',' join two digits. Every other non-space character
// is a token of its own.
std::vector<Token> tokenize(std::string_view text);

std::vector<std::string> token_texts(const std::vector<Token>& tokens);

// Joins tokens with single spaces, except no space before closing punctuation
// and none after opening brackets.
std::string detokenize(const std::vector<std::string>& tokens);

// Segments on . : ; ? ! followed by whitespace (or end of text). The boundary
// punctuation stays with the left segment. A period after a known abbreviation
// or after a single capital letter that is not the first token of the segment
// is not a boundary. Bullet markers at the start of a line begin a new
// segment. Segments are trimmed and never empty.
std::vector<std::string> split_sentences(std::string_view text);

enum class Role { kProcessor, kController };

std::string_view role_name(Role role);

struct AliasEntry {
  // Literal text with optional wildcards: '*' matches zero or more word
  // characters, '?' exactly one. Must begin and end with a word character or
  // a wildcard, and contain at least one literal word character.
  std::string pattern;
  Role replacement = Role::kProcessor;
};

class AliasTable {
 public:
  AliasTable() = default;
  // Throws ValidationError for empty patterns, patterns breaking the edge rule,
  // and patterns that match a replacement token (which would break
  // idempotence).
  explicit AliasTable(std::vector<AliasEntry> entries);

  const std::vector<AliasEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<AliasEntry> entries_;
};

// "pattern<TAB>PROCESSOR|CONTROLLER" per line; '#' starts a comment line.
AliasTable parse_alias_table(std::istream& in, const std::string& source = "<aliases>");
AliasTable load_alias_table(const std::string& path);

struct AppliedAlias {
  std::string pattern;
  std::string matched;
  std::string replacement;
  // Byte span of the match in the input text.
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct NormalizedText {
  std::string text;
  std::vector<AppliedAlias> applied;
};

// Case-insensitive, word-bounded, longest match first, left to right,
// non-overlapping. Existing PROCESSOR / CONTROLLER words are never rewritten.
NormalizedText normalize(std::string_view text, const AliasTable& aliases);

// Runs of two or more capitalized words (ignoring leading function words)
// that no alias covers. Offered to a reviewer as alias candidates, most
// frequent first.
std::vector<std::pair<std::string, std::size_t>> review_candidates(
    const std::vector<std::string>& normalized_sentences);

}  // namespace dpacheck::preprocess
