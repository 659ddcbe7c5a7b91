#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpacheck/preprocess.hpp"

namespace dpacheck::embedding {

// Vectors are stored as f32; arithmetic on them accumulates in double.
using EmbeddingVector = std::vector<float>;

// "[CLS] t1 ... tk [SEP]": the single-sentence input encoding of BERT-family
// encoders.
std::string encode_for_llm(const std::vector<preprocess::Token>& tokens);
std::string encode_for_llm(const std::vector<std::string>& tokens);

// Cosine similarity clamped to [-1, 1]. Throws ValidationError on dimension
// mismatch and when either vector is all zeros.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

// Sentence vectors keyed by content_hash(normalized text), with optional
// per-sentence token sequences and a word vocabulary.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t dim, std::string model_id);

  std::size_t dim() const { return dim_; }
  const std::string& model_id() const { return model_id_; }

  // All inserts validate length == dim and finiteness.
  void add(std::uint64_t hash, EmbeddingVector v);
  void add_text(std::string_view text, EmbeddingVector v);
  void add_tokens(std::uint64_t hash, std::vector<EmbeddingVector> seq);
  void add_word(std::string word, EmbeddingVector v);

  const std::map<std::uint64_t, EmbeddingVector>& entries() const { return entries_; }
  const std::map<std::uint64_t, std::vector<EmbeddingVector>>& token_entries() const {
    return token_entries_;
  }
  const std::map<std::string, EmbeddingVector>& vocabulary() const { return vocabulary_; }

  bool has_tokens() const { return !token_entries_.empty(); }
  bool has_vocabulary() const { return !vocabulary_.empty(); }

  const EmbeddingVector* find(std::uint64_t hash) const;
  // Throws NotFoundError("embedding not found: <hash>").
  const EmbeddingVector& at(std::uint64_t hash) const;
  const EmbeddingVector& lookup(std::string_view text) const;
  // Throws CapabilityError when the store has no token section.
  const std::vector<EmbeddingVector>& token_sequence(std::uint64_t hash) const;
  const EmbeddingVector* word_vector(std::string_view word) const;

 private:
  std::size_t dim_ = 0;
  std::string model_id_;
  std::map<std::uint64_t, EmbeddingVector> entries_;
  std::map<std::uint64_t, std::vector<EmbeddingVector>> token_entries_;
  std::map<std::string, EmbeddingVector> vocabulary_;
};

// Binary store layout (little-endian):
//   "DPAEMBED" u32 version=1, u32 dim, u32 len + hash tag, u32 len + model id,
//   u64 count, count x (u64 hash, f32 x dim) in ascending hash order,
//   then optional sections, each introduced by a 4-byte tag:
//   "TOKS" u64 count, count x (u64 hash, u32 n, n x f32 x dim)
//   "VOCB" u64 count, count x (u32 len + word bytes, f32 x dim)
inline constexpr std::uint32_t kStoreVersion = 1;

void save_store(const EmbeddingStore& store, const std::string& path);
std::string serialize_store(const EmbeddingStore& store);
// Throws DataError("store corrupt at byte <offset>: ...").
EmbeddingStore load_store(const std::string& path);
EmbeddingStore parse_store(std::string_view bytes);

struct StoreReport {
  bool valid = false;
  std::string message;
  std::optional<std::size_t> error_offset;
  std::size_t dim = 0;
  std::size_t count = 0;
  std::size_t token_sequences = 0;
  std::size_t vocabulary_size = 0;
  std::string model_id;
};

// Structural check plus self-cosine == 1 +- 1e-6 on up to 10 sampled non-zero
// vectors.
StoreReport validate_store(const std::string& path);
StoreReport validate_store_bytes(std::string_view bytes);

struct Neighbor {
  std::uint64_t hash;
  double similarity;
};

// Exhaustive scan: top-k by cosine, descending, ties by ascending hash.
// Zero vectors in the store are skipped.
std::vector<Neighbor> nearest_neighbors(const EmbeddingStore& store,
                                        std::span<const float> query, std::size_t k,
                                        const std::set<std::uint64_t>& exclude = {});

struct WordNeighbor {
  std::string word;
  double similarity;
};

// Same scan over the vocabulary section, ties by ascending word.
std::vector<WordNeighbor> nearest_words(const EmbeddingStore& store,
                                        std::span<const float> query, std::size_t k,
                                        const std::set<std::string>& exclude = {});

// Mean of the vocabulary vectors of the text's lowercased word tokens;
// nullopt when no token is in the vocabulary.
std::optional<EmbeddingVector> mean_word_vector(const EmbeddingStore& store,
                                                std::string_view text);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string model_id() const = 0;
  virtual EmbeddingVector embed(std::string_view sentence_text) = 0;
  virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);
  // Token sequences, when the provider carries them.
  virtual const EmbeddingStore* store() const { return nullptr; }
};

class StoreProvider : public EmbeddingProvider {
 public:
  explicit StoreProvider(std::shared_ptr<const EmbeddingStore> store);
  std::size_t dim() const override { return store_->dim(); }
  std::string model_id() const override { return store_->model_id(); }
  EmbeddingVector embed(std::string_view sentence_text) override;
  const EmbeddingStore* store() const override { return store_.get(); }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
};

struct HttpProviderOptions {
  std::size_t max_batch = 64;
  int retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds timeout{10000};
};

// POST {"texts": [...]} -> {"dim": d, "vectors": [[...], ...]} against
// an endpoint such as http://127.0.0.1:8088/embed. Transport failures are
// retried with exponential backoff, then surface as ServiceError.
class HttpProvider : public EmbeddingProvider {
 public:
  explicit HttpProvider(std::string endpoint, HttpProviderOptions options = {});
  std::size_t dim() const override;
  std::string model_id() const override { return "remote:" + endpoint_; }
  EmbeddingVector embed(std::string_view sentence_text) override;
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

 private:
  std::vector<EmbeddingVector> request(const std::vector<std::string>& texts) const;

  std::string endpoint_;
  std::string host_;
  std::string path_;
  HttpProviderOptions options_;
  mutable std::optional<std::size_t> dim_;
};

}  // namespace dpacheck::embedding
