#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace textcausal {

using Seed = std::uint64_t;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive, platform-independent hash used to derive child seeds.
// Identical part sequences always give identical seeds.
class SeedHasher {
 public:
  explicit SeedHasher(Seed base = 0) : state_(splitmix64(base)) {}

  SeedHasher& add(std::uint64_t v);
  SeedHasher& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
  SeedHasher& add(int v) { return add(static_cast<std::int64_t>(v)); }
  SeedHasher& add(double v);
  SeedHasher& add(std::string_view s);

  [[nodiscard]] Seed finish() const { return splitmix64(state_); }

 private:
  std::uint64_t state_;
};

inline Seed derive_seed(Seed base, std::uint64_t a) { return SeedHasher(base).add(a).finish(); }
inline Seed derive_seed(Seed base, std::string_view tag, std::uint64_t a = 0) {
  return SeedHasher(base).add(tag).add(a).finish();
}

// Thin wrapper over mt19937_64. Every conversion to doubles and integers is
// done here rather than through <random> distributions, whose output is
// implementation-defined; that keeps sampled data byte-identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Linear-scan inverse CDF; probabilities need not sum exactly to one.
  std::size_t categorical(std::span<const double> probs);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Cumulative table for repeated O(log n) draws from one distribution.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> probs);

  std::size_t operator()(Rng& rng) const;
  [[nodiscard]] std::size_t size() const { return cumulative_.size(); }

 private:
  std::vector<double> cumulative_;
};

}  // namespace textcausal
