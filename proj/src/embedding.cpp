#include "dpacheck/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dpacheck/errors.hpp"
#include "dpacheck/hash.hpp"
#include "dpacheck/random.hpp"

namespace dpacheck::embedding {

std::string encode_for_llm(const std::vector<std::string>& tokens) {
  std::string out = "[CLS]";
  for (const auto& t : tokens) {
    out += ' ';
    out += t;
  }
  out += " [SEP]";
  return out;
}

std::string encode_for_llm(const std::vector<preprocess::Token>& tokens) {
  return encode_for_llm(preprocess::token_texts(tokens));
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine of vectors with dims " + std::to_string(a.size()) +
                          " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine similarity undefined for a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool is_zero(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

EmbeddingStore::EmbeddingStore(std::size_t dim, std::string model_id)
    : dim_(dim), model_id_(std::move(model_id)) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
}

namespace {

void check_vector(const EmbeddingVector& v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) +
                          ", store dimension is " + std::to_string(dim));
  }
  for (float x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + " has a non-finite value");
  }
}

}  // namespace

void EmbeddingStore::add(std::uint64_t hash, EmbeddingVector v) {
  check_vector(v, dim_, "sentence vector");
  entries_[hash] = std::move(v);
}

void EmbeddingStore::add_text(std::string_view text, EmbeddingVector v) {
  add(content_hash(text), std::move(v));
}

void EmbeddingStore::add_tokens(std::uint64_t hash, std::vector<EmbeddingVector> seq) {
  if (seq.empty()) throw ValidationError("empty token sequence for " + hash_hex(hash));
  for (const auto& v : seq) check_vector(v, dim_, "token vector");
  token_entries_[hash] = std::move(seq);
}

void EmbeddingStore::add_word(std::string word, EmbeddingVector v) {
  if (word.empty()) throw ValidationError("empty vocabulary word");
  check_vector(v, dim_, "word vector");
  vocabulary_[std::move(word)] = std::move(v);
}

const EmbeddingVector* EmbeddingStore::find(std::uint64_t hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

const EmbeddingVector& EmbeddingStore::at(std::uint64_t hash) const {
  if (const auto* v = find(hash)) return *v;
  throw NotFoundError("embedding not found: " + hash_hex(hash));
}

const EmbeddingVector& EmbeddingStore::lookup(std::string_view text) const {
  return at(content_hash(text));
}

const std::vector<EmbeddingVector>& EmbeddingStore::token_sequence(std::uint64_t hash) const {
  if (!has_tokens()) {
    throw CapabilityError(
        "embedding store has no token section; re-export with token vectors or use "
        "the length-1 sentence-vector fallback");
  }
  auto it = token_entries_.find(hash);
  if (it == token_entries_.end()) {
    throw NotFoundError("token embeddings not found: " + hash_hex(hash));
  }
  return it->second;
}

const EmbeddingVector* EmbeddingStore::word_vector(std::string_view word) const {
  auto it = vocabulary_.find(std::string(word));
  return it == vocabulary_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[8] = {'D', 'P', 'A', 'E', 'M', 'B', 'E', 'D'};
constexpr char kTokensTag[4] = {'T', 'O', 'K', 'S'};
constexpr char kVocabTag[4] = {'V', 'O', 'C', 'B'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
  }
  void f32(float f) { le(std::bit_cast<std::uint32_t>(f)); }
  void str(std::string_view s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void vec(const EmbeddingVector& v) {
    for (float f : v) f32(f);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw DataError("store corrupt at byte " + std::to_string(at) + ": " + what);
  }

  std::string_view take(std::size_t n, const char* what) {
    if (remaining() < n) fail(std::string("truncated ") + what, pos_);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le(const char* what) {
    auto s = take(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return static_cast<T>(v);
  }
  std::string str(const char* what) {
    auto n = le<std::uint32_t>(what);
    return std::string(take(n, what));
  }
  EmbeddingVector vec(std::size_t dim, const char* what) {
    const std::size_t start = pos_;
    if (remaining() / 4 < dim) fail(std::string("truncated ") + what, start);
    EmbeddingVector v(dim);
    for (auto& f : v) {
      f = std::bit_cast<float>(le<std::uint32_t>(what));
      if (!std::isfinite(f)) fail(std::string("non-finite value in ") + what, start);
    }
    return v;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_store(const EmbeddingStore& store) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le(kStoreVersion);
  w.le(static_cast<std::uint32_t>(store.dim()));
  w.str(kHashTag);
  w.str(store.model_id());
  w.le(static_cast<std::uint64_t>(store.entries().size()));
  for (const auto& [h, v] : store.entries()) {
    w.le(h);
    w.vec(v);
  }
  if (store.has_tokens()) {
    w.bytes(kTokensTag, 4);
    w.le(static_cast<std::uint64_t>(store.token_entries().size()));
    for (const auto& [h, seq] : store.token_entries()) {
      w.le(h);
      w.le(static_cast<std::uint32_t>(seq.size()));
      for (const auto& v : seq) w.vec(v);
    }
  }
  if (store.has_vocabulary()) {
    w.bytes(kVocabTag, 4);
    w.le(static_cast<std::uint64_t>(store.vocabulary().size()));
    for (const auto& [word, v] : store.vocabulary()) {
      w.str(word);
      w.vec(v);
    }
  }
  return w.take();
}

void save_store(const EmbeddingStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write store " + path);
  const auto bytes = serialize_store(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing store " + path);
}

EmbeddingStore parse_store(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic, "magic") != std::string_view(kMagic, sizeof kMagic)) {
    r.fail("bad magic", 0);
  }
  const std::size_t version_at = r.offset();
  if (auto v = r.le<std::uint32_t>("version"); v != kStoreVersion) {
    r.fail("unsupported version " + std::to_string(v), version_at);
  }
  const std::size_t dim_at = r.offset();
  const auto dim = r.le<std::uint32_t>("dim");
  if (dim == 0) r.fail("zero dimension", dim_at);
  const std::size_t tag_at = r.offset();
  if (auto tag = r.str("hash tag"); tag != kHashTag) {
    r.fail("unknown hash algorithm '" + tag + "'", tag_at);
  }
  EmbeddingStore store(dim, r.str("model id"));

  const std::size_t count_at = r.offset();
  const auto count = r.le<std::uint64_t>("count");
  if (count > r.remaining() / (8 + 4ULL * dim)) {
    r.fail("record count " + std::to_string(count) + " exceeds file size for dim " +
               std::to_string(dim),
           count_at);
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const auto h = r.le<std::uint64_t>("record hash");
    if (store.find(h)) r.fail("duplicate hash " + hash_hex(h), at);
    store.add(h, r.vec(dim, "record vector"));
  }

  while (!r.at_end()) {
    const std::size_t at = r.offset();
    if (r.remaining() < 4) r.fail("trailing bytes", at);
    const auto tag = r.take(4, "section tag");
    if (tag == std::string_view(kTokensTag, 4)) {
      const auto n = r.le<std::uint64_t>("token count");
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t rec_at = r.offset();
        const auto h = r.le<std::uint64_t>("token hash");
        const auto len = r.le<std::uint32_t>("token length");
        if (len == 0) r.fail("empty token sequence", rec_at);
        if (len > r.remaining() / (4ULL * dim)) r.fail("truncated token sequence", rec_at);
        std::vector<EmbeddingVector> seq;
        seq.reserve(len);
        for (std::uint32_t j = 0; j < len; ++j) seq.push_back(r.vec(dim, "token vector"));
        store.add_tokens(h, std::move(seq));
      }
    } else if (tag == std::string_view(kVocabTag, 4)) {
      const auto n = r.le<std::uint64_t>("vocabulary count");
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t rec_at = r.offset();
        auto word = r.str("vocabulary word");
        if (word.empty()) r.fail("empty vocabulary word", rec_at);
        store.add_word(std::move(word), r.vec(dim, "word vector"));
      }
    } else {
      r.fail("unknown section tag", at);
    }
  }
  return store;
}

EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open store " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_store(buf.str());
}

StoreReport validate_store_bytes(std::string_view bytes) {
  StoreReport report;
  EmbeddingStore store;
  try {
    store = parse_store(bytes);
  } catch (const DataError& e) {
    report.message = e.what();
    const std::string msg = e.what();
    const std::string key = "at byte ";
    if (auto p = msg.find(key); p != std::string::npos) {
      report.error_offset = std::stoull(msg.substr(p + key.size()));
    }
    return report;
  }
  report.dim = store.dim();
  report.count = store.entries().size();
  report.token_sequences = store.token_entries().size();
  report.vocabulary_size = store.vocabulary().size();
  report.model_id = store.model_id();

  std::vector<const EmbeddingVector*> nonzero;
  for (const auto& [h, v] : store.entries()) {
    if (!is_zero(v)) nonzero.push_back(&v);
  }
  Rng rng(0);
  const auto picks = rng.sample_without_replacement(nonzero.size(), std::min<std::size_t>(10, nonzero.size()));
  for (auto i : picks) {
    const double c = cosine(*nonzero[i], *nonzero[i]);
    if (std::abs(c - 1.0) > 1e-6) {
      report.message = "self-cosine " + std::to_string(c) + " deviates from 1";
      return report;
    }
  }
  report.valid = true;
  report.message = "valid";
  return report;
}

StoreReport validate_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    StoreReport r;
    r.message = "cannot open " + path;
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return validate_store_bytes(buf.str());
}

// ---------------------------------------------------------------------------
// Search

namespace {

template <typename Key, typename Table, typename Excluded>
std::vector<std::pair<Key, double>> scan(const Table& table, std::span<const float> query,
                                         std::size_t k, const Excluded& exclude) {
  std::vector<std::pair<Key, double>> all;
  if (k == 0) throw ValidationError("nearest-neighbor k must be at least 1");
  if (table.empty()) return all;
  for (const auto& [key, v] : table) {
    if (exclude.count(key) || is_zero(v)) continue;
    all.emplace_back(key, cosine(query, std::span<const float>(v)));
  }
  const auto by_similarity = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    by_similarity);
  all.resize(keep);
  return all;
}

}  // namespace

std::vector<Neighbor> nearest_neighbors(const EmbeddingStore& store,
                                        std::span<const float> query, std::size_t k,
                                        const std::set<std::uint64_t>& exclude) {
  std::vector<Neighbor> out;
  for (auto& [h, s] : scan<std::uint64_t>(store.entries(), query, k, exclude)) {
    out.push_back({h, s});
  }
  return out;
}

std::optional<EmbeddingVector> mean_word_vector(const EmbeddingStore& store,
                                                std::string_view text) {
  std::vector<double> sum(store.dim(), 0.0);
  std::size_t used = 0;
  for (const auto& t : preprocess::tokenize(text)) {
    std::string w = t.text;
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto* v = store.word_vector(w);
    if (!v) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    ++used;
  }
  if (used == 0) return std::nullopt;
  EmbeddingVector out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = static_cast<float>(sum[i] / static_cast<double>(used));
  return out;
}

std::vector<WordNeighbor> nearest_words(const EmbeddingStore& store,
                                        std::span<const float> query, std::size_t k,
                                        const std::set<std::string>& exclude) {
  std::vector<WordNeighbor> out;
  for (auto& [w, s] : scan<std::string>(store.vocabulary(), query, k, exclude)) {
    out.push_back({w, s});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Providers

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

StoreProvider::StoreProvider(std::shared_ptr<const EmbeddingStore> store)
    : store_(std::move(store)) {
  if (!store_) throw ValidationError("null embedding store");
}

EmbeddingVector StoreProvider::embed(std::string_view sentence_text) {
  return store_->lookup(sentence_text);
}

HttpProvider::HttpProvider(std::string endpoint, HttpProviderOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  const std::string scheme = "http://";
  if (endpoint_.rfind(scheme, 0) != 0) {
    throw ValidationError("provider endpoint must start with http://, got " + endpoint_);
  }
  const auto rest = endpoint_.substr(scheme.size());
  const auto slash = rest.find('/');
  host_ = scheme + rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  if (options_.max_batch == 0 || options_.max_batch > 64) options_.max_batch = 64;
}

std::vector<EmbeddingVector> HttpProvider::request(const std::vector<std::string>& texts) const {
  using nlohmann::json;
  const std::string body = json{{"texts", texts}}.dump();
  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(host_);
    const auto secs = options_.timeout.count() / 1000;
    const auto usecs = (options_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ServiceError("embedding service returned HTTP " + std::to_string(res->status));
    }
    json reply;
    try {
      reply = json::parse(res->body);
      const auto d = reply.at("dim").get<std::size_t>();
      auto vectors = reply.at("vectors").get<std::vector<EmbeddingVector>>();
      if (dim_ && *dim_ != d) {
        throw ServiceError("embedding service changed dimension from " +
                           std::to_string(*dim_) + " to " + std::to_string(d));
      }
      dim_ = d;
      if (vectors.size() != texts.size()) {
        throw ServiceError("embedding service returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
      }
      for (const auto& v : vectors) {
        if (v.size() != d) throw ServiceError("embedding service returned a vector of wrong length");
      }
      return vectors;
    } catch (const json::exception& e) {
      throw ServiceError(std::string("malformed embedding service reply: ") + e.what());
    }
  }
  throw ServiceError("embedding service " + endpoint_ + " unreachable after " +
                     std::to_string(options_.retries) + " retries: " + last_error);
}

std::size_t HttpProvider::dim() const {
  if (!dim_) request({});
  return *dim_;
}

EmbeddingVector HttpProvider::embed(std::string_view sentence_text) {
  return request({std::string(sentence_text)}).front();
}

std::vector<EmbeddingVector> HttpProvider::embed_batch(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); i += options_.max_batch) {
    const auto end = std::min(texts.size(), i + options_.max_batch);
    auto part = request({texts.begin() + static_cast<std::ptrdiff_t>(i),
                         texts.begin() + static_cast<std::ptrdiff_t>(end)});
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace dpacheck::embedding
