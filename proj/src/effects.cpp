#include "textcausal/effects.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace textcausal {

TokenDistribution TokenDistribution::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("TokenDistribution::uniform: empty vocabulary");
  std::vector<double> ones(n, 1.0);
  return clamp_normalize(ones);
}

TokenDistribution TokenDistribution::from_normalized(std::vector<double> probs) {
  if (probs.empty()) throw std::invalid_argument("TokenDistribution: empty vector");
  double total = 0.0;
  for (double x : probs) {
    // Allow the sub-ulp undershoot a single renormalization can leave.
    if (!(x >= kFloor * (1.0 - 1e-6) && x <= kCeil)) {
      throw std::invalid_argument("TokenDistribution: entry outside clamp bounds");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("TokenDistribution: entries do not sum to one");
  return TokenDistribution(std::move(probs));
}

TokenDistribution clamp_normalize(std::span<const double> raw) {
  if (raw.empty()) throw std::invalid_argument("clamp_normalize: empty vector");
  double total = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x) || x < 0.0) {
      throw std::invalid_argument("clamp_normalize: entries must be finite and nonnegative");
    }
    total += x;
  }
  if (!(total > 0.0)) throw std::invalid_argument("clamp_normalize: all-zero input");

  std::vector<double> p(raw.size());
  double clamped_total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    p[i] = std::clamp(raw[i] / total, TokenDistribution::kFloor, TokenDistribution::kCeil);
    clamped_total += p[i];
  }
  for (double& x : p) x /= clamped_total;
  return TokenDistribution(std::move(p));
}

VocabOrdering::VocabOrdering(std::vector<std::uint32_t> ranks) : ranks_(std::move(ranks)) {
  std::vector<bool> seen(ranks_.size(), false);
  for (std::uint32_t r : ranks_) {
    if (r < 1 || r > ranks_.size() || seen[r - 1]) {
      throw std::invalid_argument("VocabOrdering: ranks must be a permutation of 1..N");
    }
    seen[r - 1] = true;
  }
}

VocabOrdering VocabOrdering::identity(std::size_t n) {
  std::vector<std::uint32_t> r(n);
  std::iota(r.begin(), r.end(), 1U);
  return VocabOrdering(std::move(r));
}

VocabOrdering VocabOrdering::reversed(std::size_t n) {
  std::vector<std::uint32_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = static_cast<std::uint32_t>(n - i);
  return VocabOrdering(std::move(r));
}

VocabOrdering VocabOrdering::from_order(std::span<const std::uint32_t> order) {
  std::vector<std::uint32_t> r(order.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] >= order.size()) throw std::invalid_argument("VocabOrdering: token out of range");
    r[order[k]] = static_cast<std::uint32_t>(k + 1);
  }
  return VocabOrdering(std::move(r));
}

std::vector<std::uint32_t> VocabOrdering::order() const {
  std::vector<std::uint32_t> o(ranks_.size());
  for (std::size_t i = 0; i < ranks_.size(); ++i) o[ranks_[i] - 1] = static_cast<std::uint32_t>(i);
  return o;
}

void EffectParams::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0) || !(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("EffectParams: tau and delta must lie in [0, 1]");
  }
}

const char* to_string(EffectForm form) {
  return form == EffectForm::kEquation ? "equation" : "zipf-product";
}

EffectForm effect_form_from_string(std::string_view name) {
  if (name == "equation") return EffectForm::kEquation;
  if (name == "zipf-product") return EffectForm::kZipfProduct;
  throw std::invalid_argument("unknown effect form '" + std::string(name) + "'");
}

namespace {

std::uint64_t count_inversions(std::vector<std::uint32_t>& v, std::vector<std::uint32_t>& buf,
                               std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      buf[k++] = v[i++];
    } else {
      inv += mid - i;
      buf[k++] = v[j++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

std::uint64_t inversions(std::vector<std::uint32_t> v) {
  std::vector<std::uint32_t> buf(v.size());
  return count_inversions(v, buf, 0, v.size());
}

double pair_count(std::size_t n) { return static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; }

}  // namespace

double kendall_tau(const VocabOrdering& a, const VocabOrdering& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("kendall_tau: need at least two tokens");
  // Walk tokens in a's preference order; b-ranks out of order are discordant.
  std::vector<std::uint32_t> seq(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) seq[a.rank(t) - 1] = b.rank(t);
  const double discordant = static_cast<double>(inversions(std::move(seq)));
  const double m = pair_count(a.size());
  return (m - 2.0 * discordant) / m;
}

OrderingPair sample_ordering_pair(std::size_t n, double tau, Seed seed) {
  if (n == 0) throw std::invalid_argument("sample_ordering_pair: empty vocabulary");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("sample_ordering_pair: tau outside [0, 1]");
  if (n == 1) return OrderingPair{VocabOrdering::identity(1), VocabOrdering::identity(1), tau, 1.0};

  const std::uint64_t max_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  // Correlation 1 - 2τ means a fraction τ of the pairs is discordant.
  const auto target =
      static_cast<std::uint64_t>(std::llround(tau * static_cast<double>(max_pairs)));

  Rng rng(seed);
  // pos[k] = token at position k+1 of v1. Inversions of pos against the
  // identity equal the discordant pairs between v0 and v1.
  std::vector<std::uint32_t> pos(n);
  std::iota(pos.begin(), pos.end(), 0U);
  std::uint64_t current = 0;
  const double mid = static_cast<double>(max_pairs) / 2.0;
  const double t = static_cast<double>(target);
  if (std::abs(t - mid) < std::min(t, static_cast<double>(max_pairs) - t)) {
    // Near-zero correlation: a uniform shuffle lands close to the target and
    // avoids walking all the way from an endpoint.
    rng.shuffle(pos);
    current = inversions(pos);
  } else if (target * 2 > max_pairs) {
    std::reverse(pos.begin(), pos.end());
    current = max_pairs;
  }

  const std::uint64_t budget = 64 * max_pairs + 1'000'000;
  for (std::uint64_t step = 0; current != target && step < budget; ++step) {
    const std::size_t k = rng.below(n - 1);
    if (pos[k] < pos[k + 1]) {
      ++current;
    } else {
      --current;
    }
    std::swap(pos[k], pos[k + 1]);
  }

  OrderingPair pair;
  pair.v0 = VocabOrdering::identity(n);
  pair.v1 = VocabOrdering::from_order(pos);
  pair.target_tau = tau;
  pair.achieved_tau_correlation = kendall_tau(pair.v0, pair.v1);
  return pair;
}

TokenDistribution modified_zipfian(const VocabOrdering& ordering, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("modified_zipfian: delta outside [0, 1]");
  if (ordering.size() == 0) throw std::invalid_argument("modified_zipfian: empty ordering");
  std::vector<double> raw(ordering.size());
  if (delta == 1.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = ordering.rank(i) == 1 ? 1.0 : 0.0;
  } else {
    const double exponent = -delta / (1.0 - delta);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = std::pow(static_cast<double>(ordering.rank(i)), exponent);
    }
  }
  return clamp_normalize(raw);
}

EffectKernel::EffectKernel(const VocabOrdering& ordering, double delta, EffectForm form)
    : weights_(ordering.size()) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("EffectKernel: delta outside [0, 1]");
  if (form == EffectForm::kZipfProduct && delta == 1.0) {
    for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] = ordering.rank(i) == 1 ? 1.0 : 0.0;
    return;
  }
  const double exponent =
      form == EffectForm::kEquation ? -delta / (1.0 + delta) : -delta / (1.0 - delta);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] = exponent == 0.0 ? 1.0 : std::pow(static_cast<double>(ordering.rank(i)), exponent);
  }
}

void EffectKernel::apply_into(std::span<const double> p, std::vector<double>& out) const {
  if (p.size() != weights_.size()) throw std::invalid_argument("EffectKernel: size mismatch");
  out.resize(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] * weights_[i];
    total += out[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("EffectKernel: all-zero product");
  double clamped_total = 0.0;
  for (double& x : out) {
    x = std::clamp(x / total, TokenDistribution::kFloor, TokenDistribution::kCeil);
    clamped_total += x;
  }
  for (double& x : out) x /= clamped_total;
}

TokenDistribution EffectKernel::apply(const TokenDistribution& p) const {
  if (p.size() != weights_.size()) throw std::invalid_argument("EffectKernel: size mismatch");
  std::vector<double> raw(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) raw[i] = p[i] * weights_[i];
  return clamp_normalize(raw);
}

TokenDistribution apply_effect(const TokenDistribution& p, const VocabOrdering& ordering,
                               double delta, EffectForm form) {
  return EffectKernel(ordering, delta, form).apply(p);
}

EffectPairDistributions h(const TokenDistribution& p, double tau, double delta,
                          const OrderingPair& orderings, EffectForm form) {
  if (tau != orderings.target_tau) {
    throw std::invalid_argument("h: orderings were sampled for a different tau");
  }
  return {apply_effect(p, orderings.v0, delta, form), apply_effect(p, orderings.v1, delta, form)};
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace textcausal
