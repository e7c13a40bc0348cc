#include "textcausal/random.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

namespace textcausal {

SeedHasher& SeedHasher::add(std::uint64_t v) {
  state_ = splitmix64(state_ ^ splitmix64(v + 0x632be59bd9b4e019ULL));
  return *this;
}

SeedHasher& SeedHasher::add(double v) {
  if (v == 0.0) v = 0.0;  // fold -0.0 onto +0.0
  return add(std::bit_cast<std::uint64_t>(v));
}

SeedHasher& SeedHasher::add(std::string_view s) {
  // FNV-1a over the bytes, length-prefixed so ("ab","c") != ("a","bc").
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  add(static_cast<std::uint64_t>(s.size()));
  return add(h);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Rejection sampling on the top of the range keeps draws unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::size_t Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("Rng::categorical: empty distribution");
  double total = 0.0;
  for (double p : probs) total += p;
  double r = uniform() * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    r -= probs[i];
    if (r < 0.0) return i;
  }
  // Rounding can leave a sliver past the last bucket.
  for (std::size_t i = probs.size(); i > 0; --i) {
    if (probs[i - 1] > 0.0) return i - 1;
  }
  return probs.size() - 1;
}

DiscreteSampler::DiscreteSampler(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("DiscreteSampler: empty distribution");
  cumulative_.resize(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0)) throw std::invalid_argument("DiscreteSampler: negative probability");
    acc += probs[i];
    cumulative_[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("DiscreteSampler: zero total mass");
}

std::size_t DiscreteSampler::operator()(Rng& rng) const {
  const double r = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  if (it == cumulative_.end()) --it;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

}  // namespace textcausal
