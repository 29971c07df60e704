#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace kdvqa {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a parent seed and an ordered list of stream
// coordinates (stage tag hash, epoch, index, ...).
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> coords);

// FNV-1a, for turning stage names into stream coordinates.
std::uint64_t hash_tag(std::string_view tag);

// Seeded random source. The engine is std::mt19937_64 (fully specified by the
// standard); the distribution mappings below are written out so that draws
// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  double normal();

  // Normal(0, stddev) resampled until it falls within two standard deviations.
  double truncated_normal(double stddev);

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace kdvqa
