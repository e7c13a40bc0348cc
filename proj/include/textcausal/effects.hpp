#pragma once

// Injection of a binary latent variable's effect into token distributions:
// vocabulary preference orderings, the modified Zipfian, and the h function
// that turns one base distribution into a (U=0, U=1) pair.

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "textcausal/random.hpp"

namespace textcausal {

// Probability vector over a vocabulary. Every instance has passed through
// clamp_normalize, so entries sit inside [kFloor, kCeil] and sum to one.
class TokenDistribution {
 public:
  static constexpr double kFloor = 1e-10;
  static constexpr double kCeil = 1.0 - 1e-10;

  TokenDistribution() = default;

  static TokenDistribution uniform(std::size_t n);
  // Adopts probabilities that already satisfy the invariants (bounds, sum
  // within 1e-9) without rescaling, so stored distributions reload
  // bit-for-bit. Throws std::invalid_argument otherwise.
  static TokenDistribution from_normalized(std::vector<double> probs);

  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] bool empty() const { return probs_.empty(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

 private:
  explicit TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  friend TokenDistribution clamp_normalize(std::span<const double> raw);

  std::vector<double> probs_;
};

// Proportional rescaling, then clamping into [kFloor, kCeil], then a single
// renormalization. Throws std::invalid_argument on an all-zero, negative or
// non-finite input.
TokenDistribution clamp_normalize(std::span<const double> raw);

// A preference over the vocabulary: rank(i) is the 1-based position of token
// i in the ordering.
class VocabOrdering {
 public:
  VocabOrdering() = default;
  // Validates that ranks is a permutation of 1..N.
  explicit VocabOrdering(std::vector<std::uint32_t> ranks);

  static VocabOrdering identity(std::size_t n);
  static VocabOrdering reversed(std::size_t n);
  // order[k] = token placed at position k+1.
  static VocabOrdering from_order(std::span<const std::uint32_t> order);

  [[nodiscard]] std::size_t size() const { return ranks_.size(); }
  [[nodiscard]] std::uint32_t rank(std::size_t token) const { return ranks_[token]; }
  [[nodiscard]] const std::vector<std::uint32_t>& ranks() const { return ranks_; }
  // Tokens listed from most to least preferred.
  [[nodiscard]] std::vector<std::uint32_t> order() const;

  friend bool operator==(const VocabOrdering&, const VocabOrdering&) = default;

 private:
  std::vector<std::uint32_t> ranks_;
};

struct EffectParams {
  double tau = 0.0;
  double delta = 0.0;

  void validate() const;
  friend bool operator==(const EffectParams&, const EffectParams&) = default;
};

struct OrderingPair {
  VocabOrdering v0;
  VocabOrdering v1;
  double target_tau = 0.0;
  double achieved_tau_correlation = 1.0;
};

// Which rank exponent the reweighting uses.
//  kEquation:    p'(x) ∝ p(x) · rank(x)^(-δ/(1+δ))
//  kZipfProduct: p'(x) ∝ p(x) · rank(x)^(-δ/(1-δ)), i.e. p times the modified
//                Zipfian; δ = 1 collapses onto the rank-1 token.
enum class EffectForm { kEquation, kZipfProduct };

const char* to_string(EffectForm form);
EffectForm effect_form_from_string(std::string_view name);

// (concordant - discordant) / (N(N-1)/2), O(N log N).
double kendall_tau(const VocabOrdering& a, const VocabOrdering& b);

// v0 is the identity. v1 comes from a random adjacent-transposition walk that
// stops once its correlation with v0 is the achievable value nearest 1 - 2τ.
// A single-token vocabulary has only the identity pair.
OrderingPair sample_ordering_pair(std::size_t n, double tau, Seed seed);

TokenDistribution modified_zipfian(const VocabOrdering& ordering, double delta);

// Precomputed rank weights for one (ordering, δ, form). Applying the kernel
// to a base distribution is the element-wise product plus clamp_normalize.
class EffectKernel {
 public:
  EffectKernel() = default;
  EffectKernel(const VocabOrdering& ordering, double delta, EffectForm form);

  [[nodiscard]] TokenDistribution apply(const TokenDistribution& p) const;
  // Same arithmetic as apply() into caller storage; out is clamp-normalized.
  void apply_into(std::span<const double> p, std::vector<double>& out) const;

  [[nodiscard]] std::size_t size() const { return weights_.size(); }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

TokenDistribution apply_effect(const TokenDistribution& p, const VocabOrdering& ordering,
                               double delta, EffectForm form = EffectForm::kEquation);

struct EffectPairDistributions {
  TokenDistribution p0;
  TokenDistribution p1;

  [[nodiscard]] const TokenDistribution& for_u(int u) const { return u ? p1 : p0; }
};

// Throws std::invalid_argument if the orderings were sampled for another τ.
EffectPairDistributions h(const TokenDistribution& p, double tau, double delta,
                          const OrderingPair& orderings,
                          EffectForm form = EffectForm::kEquation);

// Both kernels of an effect, ready for repeated use over a dataset.
struct EffectKernelPair {
  EffectKernel k0;
  EffectKernel k1;

  EffectKernelPair() = default;
  EffectKernelPair(const OrderingPair& orderings, double delta, EffectForm form)
      : k0(orderings.v0, delta, form), k1(orderings.v1, delta, form) {}

  [[nodiscard]] const EffectKernel& for_u(int u) const { return u ? k1 : k0; }
};

// Total-variation distance between two probability vectors of equal length.
double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace textcausal
