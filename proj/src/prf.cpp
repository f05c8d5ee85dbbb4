#include "synguard/prf.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "synguard/error.hpp"

namespace synguard {

namespace {

// Domain separators, ASCII tags packed into one word each.
constexpr std::uint64_t kDomainSeed = 0x646565732d677773ULL;   // "swg-seed"
constexpr std::uint64_t kDomainEmpty = 0x79746d652d677773ULL;  // "swg-emty"
constexpr std::uint64_t kDomainG = 0x6c61762d672d7773ULL;      // "sw-g-val"
constexpr std::uint64_t kDomainFinger = 0x7270676e69662d73ULL; // "s-fingpr"

inline std::uint64_t rotl(std::uint64_t x, int b) { return (x << b) | (x >> (64 - b)); }

struct SipState {
  std::uint64_t v0, v1, v2, v3;

  SipState(std::uint64_t k0, std::uint64_t k1)
      : v0(0x736f6d6570736575ULL ^ k0),
        v1(0x646f72616e646f6dULL ^ k1),
        v2(0x6c7967656e657261ULL ^ k0),
        v3(0x7465646279746573ULL ^ k1) {}

  void round() {
    v0 += v1; v1 = rotl(v1, 13); v1 ^= v0; v0 = rotl(v0, 32);
    v2 += v3; v3 = rotl(v3, 16); v3 ^= v2;
    v0 += v3; v3 = rotl(v3, 21); v3 ^= v0;
    v2 += v1; v1 = rotl(v1, 17); v1 ^= v2; v2 = rotl(v2, 32);
  }

  void absorb(std::uint64_t m) {
    v3 ^= m;
    round();
    round();
    v0 ^= m;
  }

  std::uint64_t finish() {
    v2 ^= 0xff;
    round();
    round();
    round();
    round();
    return v0 ^ v1 ^ v2 ^ v3;
  }
};

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t siphash24(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint64_t> words) {
  SipState s(k0, k1);
  for (std::uint64_t w : words) s.absorb(w);
  s.absorb(static_cast<std::uint64_t>(words.size() * 8) << 56);
  return s.finish();
}

std::uint64_t siphash24_bytes(std::uint64_t k0, std::uint64_t k1, std::span<const std::uint8_t> bytes) {
  SipState s(k0, k1);
  const std::size_t full = bytes.size() / 8;
  for (std::size_t i = 0; i < full; ++i) s.absorb(load_le64(bytes.data() + 8 * i));
  std::uint64_t last = static_cast<std::uint64_t>(bytes.size() & 0xff) << 56;
  for (std::size_t i = 0; i < bytes.size() % 8; ++i)
    last |= static_cast<std::uint64_t>(bytes[8 * full + i]) << (8 * i);
  s.absorb(last);
  return s.finish();
}

void WatermarkKey::validate() const {
  if (m < 1) throw InvalidArgument("watermark key: m must be at least 1");
  if (m > 30) throw InvalidArgument("watermark key: m above 30 is not supported");
  if (window < 1) throw InvalidArgument("watermark key: window must be at least 1");
}

std::uint64_t WatermarkKey::k0() const { return load_le64(bytes.data()) ^ load_le64(bytes.data() + 16); }
std::uint64_t WatermarkKey::k1() const { return load_le64(bytes.data() + 8) ^ load_le64(bytes.data() + 24); }

std::string WatermarkKey::to_hex() const {
  std::string out;
  char buf[3];
  for (auto b : bytes) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

std::string WatermarkKey::fingerprint() const {
  std::uint64_t h = siphash24_bytes(kDomainFinger, 0, bytes);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

WatermarkKey WatermarkKey::from_hex(std::string_view hex, int m, int window) {
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.back()))) hex.remove_suffix(1);
  while (!hex.empty() && std::isspace(static_cast<unsigned char>(hex.front()))) hex.remove_prefix(1);
  if (hex.size() != 64) throw FormatError("key must be exactly 64 hex characters");
  WatermarkKey key;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_digit(hex[2 * i]);
    int lo = hex_digit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw FormatError("key contains a non-hex character");
    key.bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  key.m = m;
  key.window = window;
  key.validate();
  return key;
}

WatermarkKey WatermarkKey::from_seed(std::uint64_t seed, int m, int window) {
  WatermarkKey key;
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < 4; ++i) {
    std::uint64_t w = splitmix64(state);
    for (std::size_t b = 0; b < 8; ++b) key.bytes[8 * i + b] = static_cast<std::uint8_t>(w >> (8 * b));
  }
  key.m = m;
  key.window = window;
  key.validate();
  return key;
}

WatermarkKey WatermarkKey::random(int m, int window) {
  std::random_device rd;
  std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  WatermarkKey key = from_seed(seed, m, window);
  for (auto& b : key.bytes) b ^= static_cast<std::uint8_t>(rd());
  return key;
}

WatermarkKey load_key(const std::filesystem::path& path, int m, int window) {
  return WatermarkKey::from_hex(read_file(path), m, window);
}

void save_key(const WatermarkKey& key, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << key.to_hex() << '\n';
}

ContextSeed context_seed(std::span<const TokenId> tokens, std::size_t position,
                         const WatermarkKey& key) {
  if (position > tokens.size()) throw InvalidArgument("context_seed: position past end of sequence");
  if (position == 0) {
    const std::uint64_t msg[] = {kDomainEmpty};
    return {siphash24(key.k0(), key.k1(), msg)};
  }
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(key.window), position);
  std::uint64_t small[18];
  std::vector<std::uint64_t> large;
  std::uint64_t* msg = small;
  if (n + 2 > std::size(small)) {
    large.resize(n + 2);
    msg = large.data();
  }
  msg[0] = kDomainSeed;
  msg[1] = n;
  for (std::size_t i = 0; i < n; ++i) msg[2 + i] = tokens[position - n + i];
  return {siphash24(key.k0(), key.k1(), std::span<const std::uint64_t>(msg, n + 2))};
}

int g_value(int l, TokenId token, ContextSeed seed, const WatermarkKey& key) {
  if (l < 1 || l > key.m) throw InvalidArgument("g_value: function index outside 1..m");
  const std::uint64_t msg[] = {kDomainG, static_cast<std::uint64_t>(l), token, seed.value};
  return static_cast<int>(siphash24(key.k0(), key.k1(), msg) & 1U);
}

int g_total(TokenId token, ContextSeed seed, const WatermarkKey& key) {
  int total = 0;
  for (int l = 1; l <= key.m; ++l) total += g_value(l, token, seed, key);
  return total;
}

}  // namespace synguard
