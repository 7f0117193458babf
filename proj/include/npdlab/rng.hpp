#pragma once

// Deterministic random-number utilities.
//
// Every stochastic routine in the library draws from an RngStream, a
// std::mt19937_64 engine seeded through SplitMix64 mixing of a (seed, stream)
// pair.  Streams are derived from a root seed plus a phase tag and a replicate
// index, so the offline, design and deployment phases consume independent and
// individually replayable sequences.  Uniform doubles and discrete sampling
// are built directly on raw 64-bit draws: the std <random> distribution
// objects are implementation-defined and would not reproduce bit-identically
// across standard libraries.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace npdlab {

// One SplitMix64 step: advances the state and returns a mixed output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Single-shot SplitMix64 mix of an arbitrary word.
inline std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t state = x;
  return splitmix64_next(state);
}

// FNV-1a over bytes.  Used for phase-tag hashing and for artifact fingerprints
// in manifests; it is stable across platforms and trivially re-derivable.
inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/**
 * Root seed plus stream identifier.  derive() maps a phase tag and replicate
 * index to a fresh stream without perturbing the root seed, so any phase of a
 * run can be replayed in isolation.  Identical (seed, stream) pairs always
 * yield identical sample sequences.
 */
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  RngSeed derive(std::string_view phase_tag, std::uint64_t index = 0) const noexcept {
    RngSeed out;
    out.seed = seed;
    out.stream = mix64(mix64(stream ^ fnv1a64(phase_tag)) + index);
    return out;
  }

  // Engine seed with both halves folded in.
  std::uint64_t key() const noexcept {
    return mix64(seed + mix64(stream ^ 0x5851f42d4c957f2dull));
  }
};

/** Stateful sampling stream.  Not thread-safe; use one stream per worker. */
class RngStream {
 public:
  explicit RngStream(RngSeed s) : engine_(s.key()) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Exponential(1); log1p keeps the draw finite since next_double() < 1.
  double next_exponential() { return -std::log1p(-next_double()); }

  // Uniform integer on [0, n); rejection keeps the draw exactly unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t umax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t overhang = (umax % n + 1) % n;  // 2^64 mod n
    const std::uint64_t max_ok = umax - overhang;
    std::uint64_t x = next_u64();
    while (x > max_ok) x = next_u64();
    return x % n;
  }

  // Index draw from an explicit probability vector by CDF inversion.  Rounding
  // residue falls on the last index with positive mass, so a row that sums to
  // one up to floating error never yields an out-of-support index.
  int sample_categorical(const std::vector<double>& p) {
    const double u = next_double();
    double acc = 0.0;
    int last_positive = -1;
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
      if (p[i] > 0.0) last_positive = i;
      acc += p[i];
      if (u < acc) return i;
    }
    if (last_positive < 0) {
      throw std::invalid_argument("sample_categorical: no positive mass");
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace npdlab
