#pragma once

// Counter-based keyed randomness.
//
// Every random quantity in the library is a pure function of a 64-bit seed
// and an integer key (edge coordinates, process identity, block index).
// Nothing carries generator state between calls, so any edge of the infinite
// lattice can be sampled lazily, in any order, from any thread.

#include <cstdint>
#include <initializer_list>
#include <span>

namespace lrperc {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Fold one word into a hash state: state' = mix64(state ^ (word + gamma)).
constexpr std::uint64_t absorb(std::uint64_t state, std::int64_t word) noexcept {
  return mix64(state ^ (static_cast<std::uint64_t>(word) + kGoldenGamma));
}

/// Top 53 bits of a state mapped to [0, 1).
constexpr double to_unit(std::uint64_t state) noexcept {
  return static_cast<double>(state >> 11) * 0x1.0p-53;
}

/// Key hasher. Absorbs the seed first, then each word in order.
class KeyHasher {
 public:
  constexpr explicit KeyHasher(std::uint64_t seed) noexcept
      : state_(absorb(0, static_cast<std::int64_t>(seed))) {}

  constexpr KeyHasher& add(std::int64_t word) noexcept {
    state_ = absorb(state_, word);
    return *this;
  }
  constexpr KeyHasher& add(std::span<const std::int64_t> words) noexcept {
    for (auto w : words) state_ = absorb(state_, w);
    return *this;
  }

  constexpr std::uint64_t state() const noexcept { return state_; }
  constexpr double unit() const noexcept { return to_unit(state_); }

 private:
  std::uint64_t state_;
};

/// Derived seed for replica `index` of a run started from `seed0`.
constexpr std::uint64_t mix_seed(std::uint64_t seed0, std::uint64_t index) noexcept {
  return KeyHasher(seed0).add(static_cast<std::int64_t>(index)).state();
}

/// Domain-separated stream seed (e.g. vertical vs horizontal bonds).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return KeyHasher(seed).add(static_cast<std::int64_t>(tag)).add(-1).state();
}

/// Sequential SplitMix64 generator seeded from a key; used where a keyed
/// stream must produce a variable number of draws (Poisson gaps).
class KeyedStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit KeyedStream(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t operator()() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }
  constexpr double unit() noexcept { return to_unit((*this)()); }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

 private:
  std::uint64_t state_;
};

}  // namespace lrperc
