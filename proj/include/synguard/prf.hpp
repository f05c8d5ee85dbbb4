#pragma once

// Keyed pseudorandom machinery: context seeds over a sliding token window and
// the m binary watermark functions g_1..g_m.
//
// Every derivation is one SipHash-2-4 call over a domain-separated message of
// little-endian 64-bit words. The 32-byte secret is folded into the 128-bit
// SipHash key as k0 = w0 ^ w2, k1 = w1 ^ w3.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "synguard/corpus.hpp"

namespace synguard {

std::uint64_t siphash24(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint64_t> words);
/// Byte-oriented reference form (standard SipHash-2-4 test vectors).
std::uint64_t siphash24_bytes(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint8_t> bytes);

struct WatermarkKey {
  std::array<std::uint8_t, 32> bytes{};
  int m = 4;
  int window = 4;

  /// Throws InvalidArgument unless m >= 1 and window >= 1.
  void validate() const;
  std::uint64_t k0() const;
  std::uint64_t k1() const;

  std::string to_hex() const;
  /// Non-secret identifier safe to store in records.
  std::string fingerprint() const;

  static WatermarkKey from_hex(std::string_view hex, int m = 4, int window = 4);
  /// Deterministic key from a seed (keygen --seed); random_device otherwise.
  static WatermarkKey from_seed(std::uint64_t seed, int m = 4, int window = 4);
  static WatermarkKey random(int m = 4, int window = 4);
};

WatermarkKey load_key(const std::filesystem::path& path, int m, int window);
void save_key(const WatermarkKey& key, const std::filesystem::path& path);

struct ContextSeed {
  std::uint64_t value = 0;
  friend bool operator==(ContextSeed, ContextSeed) = default;
};

/// Seed for position `position` of `tokens`: PRF over the last
/// min(window, position) ids before it. Position 0 gets a fixed constant.
ContextSeed context_seed(std::span<const TokenId> tokens, std::size_t position,
                         const WatermarkKey& key);

/// g_l(token, seed) in {0,1}; l is 1-based.
int g_value(int l, TokenId token, ContextSeed seed, const WatermarkKey& key);

/// Sum of g_l over l = 1..m.
int g_total(TokenId token, ContextSeed seed, const WatermarkKey& key);

}  // namespace synguard
