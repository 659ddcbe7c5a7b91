#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dpacheck {

// 64-bit FNV-1a over the UTF-8 bytes. Used as the embedding store key and for
// artifact digests; the algorithm is recorded in store headers as kHashTag.
inline constexpr std::string_view kHashTag = "fnv1a64";

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Key for a (normalized) sentence: surrounding whitespace is ignored.
std::uint64_t content_hash(std::string_view text);

// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(std::string_view hex);

// Digest of a file's bytes, hex encoded. Throws NotFoundError.
std::string file_digest(const std::string& path);

}  // namespace dpacheck
