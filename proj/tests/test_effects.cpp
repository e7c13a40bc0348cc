#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textcausal/effects.hpp"

using namespace textcausal;

namespace {

// Equal up to the rounding of one renormalization.
void expect_same(const TokenDistribution& a, const TokenDistribution& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

// O(N^2) pair enumeration.
double brute_kendall(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  double conc = 0, disc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double s = (static_cast<double>(a[i]) - a[j]) * (static_cast<double>(b[i]) - b[j]);
      (s > 0 ? conc : disc) += 1;
    }
  }
  return (conc - disc) / (a.size() * (a.size() - 1) / 2.0);
}

std::vector<double> scalar_effect(const std::vector<double>& p, const std::vector<std::uint32_t>& ranks, double delta) {
  std::vector<double> out(p.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] * std::pow(static_cast<double>(ranks[i]), -delta / (1.0 + delta));
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

VocabOrdering random_ordering(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> ranks(n);
  std::iota(ranks.begin(), ranks.end(), 1u);
  rng.shuffle(ranks);
  return VocabOrdering(ranks);
}

}  // namespace

TEST(KendallTau, IdentityAndReversal) {
  for (std::size_t n : {2u, 5u, 16u, 100u}) {
    EXPECT_DOUBLE_EQ(kendall_tau(VocabOrdering::identity(n), VocabOrdering::identity(n)), 1.0);
    EXPECT_DOUBLE_EQ(kendall_tau(VocabOrdering::identity(n), VocabOrdering::reversed(n)), -1.0);
  }
}

TEST(KendallTau, ThreeElementHandCount) {
  EXPECT_NEAR(kendall_tau(VocabOrdering({1, 2, 3}), VocabOrdering({1, 3, 2})), 1.0 / 3.0, 1e-15);
}

TEST(KendallTau, MatchesPairEnumeration) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const auto a = random_ordering(n, rng);
    const auto b = random_ordering(n, rng);
    EXPECT_NEAR(kendall_tau(a, b), brute_kendall(a.ranks(), b.ranks()), 1e-12);
  }
}

TEST(KendallTau, LengthMismatchThrows) {
  EXPECT_THROW(kendall_tau(VocabOrdering::identity(3), VocabOrdering::identity(4)), std::invalid_argument);
}

TEST(VocabOrdering, RejectsNonPermutation) {
  EXPECT_THROW(VocabOrdering({1, 1, 3}), std::invalid_argument);
  EXPECT_THROW(VocabOrdering({0, 1, 2}), std::invalid_argument);
}

TEST(OrderingPair, ExtremeTargets) {
  const auto zero = sample_ordering_pair(16, 0.0, 3);
  EXPECT_EQ(zero.v0, VocabOrdering::identity(16));
  EXPECT_EQ(zero.v1, zero.v0);
  EXPECT_DOUBLE_EQ(zero.achieved_tau_correlation, 1.0);
  const auto one = sample_ordering_pair(16, 1.0, 3);
  EXPECT_EQ(one.v1, VocabOrdering::reversed(16));
  EXPECT_DOUBLE_EQ(one.achieved_tau_correlation, -1.0);
}

TEST(OrderingPair, AchievedCorrelationIsExact) {
  for (Seed s = 0; s < 20; ++s) {
    const auto p = sample_ordering_pair(16, 0.3, s);
    EXPECT_DOUBLE_EQ(p.achieved_tau_correlation, kendall_tau(p.v0, p.v1));
  }
}

TEST(OrderingPair, MeanCorrelationHitsTarget) {
  for (double tau : {0.1, 0.5, 0.84}) {
    double sum = 0;
    for (Seed s = 0; s < 100; ++s) sum += sample_ordering_pair(16, tau, s).achieved_tau_correlation;
    EXPECT_NEAR(sum / 100.0, 1.0 - 2.0 * tau, 0.05) << "tau " << tau;
  }
}

TEST(OrderingPair, Deterministic) {
  EXPECT_EQ(sample_ordering_pair(40, 0.37, 11).v1, sample_ordering_pair(40, 0.37, 11).v1);
  EXPECT_NE(sample_ordering_pair(40, 0.37, 11).v1, sample_ordering_pair(40, 0.37, 12).v1);
}

TEST(OrderingPair, TinyVocabReturnsNearestAchievable) {
  const auto p = sample_ordering_pair(2, 0.5, 0);
  EXPECT_TRUE(p.achieved_tau_correlation == 1.0 || p.achieved_tau_correlation == -1.0);
  EXPECT_DOUBLE_EQ(p.target_tau, 0.5);
}

TEST(ModifiedZipfian, Cases) {
  const auto u = modified_zipfian(VocabOrdering::identity(8), 0.0);
  for (double v : u.probs()) EXPECT_NEAR(v, 0.125, 1e-15);
  const auto two = modified_zipfian(VocabOrdering::identity(2), 0.5);
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-12);
  const auto point = modified_zipfian(VocabOrdering::reversed(5), 1.0);
  const double total = (1.0 - 1e-10) + 4e-10;
  EXPECT_NEAR(point[4], (1.0 - 1e-10) / total, 1e-15);
  EXPECT_NEAR(point[0], 1e-10 / total, 1e-20);
}

TEST(ApplyEffect, HandCalculation) {
  const auto p = TokenDistribution::uniform(2);
  const auto out = apply_effect(p, VocabOrdering::identity(2), 1.0);
  EXPECT_NEAR(out[0], 0.5858, 1e-4);
  EXPECT_NEAR(out[1], 0.4142, 1e-4);
}

TEST(ApplyEffect, DeltaZeroIsIdentity) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> raw(1 + rng.below(30));
    for (auto& v : raw) v = rng.uniform();
    raw[0] += 0.01;
    const auto p = clamp_normalize(raw);
    const auto ord = random_ordering(raw.size(), rng);
    expect_same(apply_effect(p, ord, 0.0), p);
    expect_same(apply_effect(p, ord, 0.0, EffectForm::kZipfProduct), p);
  }
}

TEST(ApplyEffect, MonotoneInRankForUniformBase) {
  Rng rng(9);
  const auto ord = random_ordering(16, rng);
  const auto out = apply_effect(TokenDistribution::uniform(16), ord, 0.7);
  const auto order = ord.order();
  for (std::size_t k = 1; k < order.size(); ++k) EXPECT_GE(out[order[k - 1]], out[order[k]]);
}

TEST(ApplyEffect, InvariantsHoldOnRandomInputs) {
  Rng rng(13);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<double> raw(n);
    for (auto& v : raw) v = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
    raw[rng.below(n)] = 1.0;
    const auto ord = random_ordering(n, rng);
    for (auto form : {EffectForm::kEquation, EffectForm::kZipfProduct}) {
      const auto out = apply_effect(clamp_normalize(raw), ord, rng.uniform(), form);
      const double sum = std::accumulate(out.probs().begin(), out.probs().end(), 0.0);
      EXPECT_NEAR(sum, 1.0, 1e-9);
      for (double v : out.probs()) {
        EXPECT_GE(v, TokenDistribution::kFloor * 0.999);
        EXPECT_LE(v, TokenDistribution::kCeil);
      }
    }
  }
}

TEST(ApplyEffect, TopTokenMassNonDecreasingInDelta) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> raw(20);
    for (auto& v : raw) v = 0.05 + rng.uniform();
    const auto p = clamp_normalize(raw);
    const auto ord = random_ordering(20, rng);
    const auto top = ord.order()[0];
    for (auto form : {EffectForm::kEquation, EffectForm::kZipfProduct}) {
      double prev = 0;
      for (int k = 0; k <= 20; ++k) {
        const double v = apply_effect(p, ord, k / 20.0, form)[top];
        EXPECT_GE(v, prev - 1e-15);
        prev = v;
      }
    }
  }
}

TEST(H, MatchesScalarReimplementation) {
  const auto p = clamp_normalize(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  OrderingPair op{VocabOrdering::identity(4), VocabOrdering::reversed(4), 1.0, -1.0};
  const auto pair = h(p, 1.0, 0.5, op);
  const auto e0 = scalar_effect({0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4}, 0.5);
  const auto e1 = scalar_effect({0.1, 0.2, 0.3, 0.4}, {4, 3, 2, 1}, 0.5);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(pair.p0[i], e0[i], 1e-12);
    EXPECT_NEAR(pair.p1[i], e1[i], 1e-12);
  }
}

TEST(H, DegenerateCases) {
  const auto p = clamp_normalize(std::vector<double>{1, 2, 3, 4, 5});
  const auto op = sample_ordering_pair(5, 0.6, 1);
  const auto none = h(p, 0.6, 0.0, op);
  EXPECT_EQ(none.p0, p);
  EXPECT_EQ(none.p1, p);
  const auto same = h(p, 0.0, 0.8, sample_ordering_pair(5, 0.0, 1));
  EXPECT_EQ(same.p0, same.p1);
  EXPECT_THROW(h(p, 0.2, 0.5, op), std::invalid_argument);
}

TEST(ClampNormalize, Cases) {
  const auto a = clamp_normalize(std::vector<double>{1, 1, 1, 1});
  for (double v : a.probs()) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto b = clamp_normalize(std::vector<double>{2, 1, 1});
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 0.25);
  const auto c = clamp_normalize(std::vector<double>{0, 1});
  EXPECT_NEAR(c[0], 1e-10, 1e-20);
  EXPECT_NEAR(c[1], 1.0 - 1e-10, 1e-15);
  EXPECT_THROW(clamp_normalize(std::vector<double>{0, 0}), std::invalid_argument);
  EXPECT_THROW(clamp_normalize(std::vector<double>{1, -1}), std::invalid_argument);
}

TEST(ClampNormalize, Idempotent) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> raw(1 + rng.below(50));
    for (auto& v : raw) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    raw[0] = 0.5;
    const auto p = clamp_normalize(raw);
    expect_same(clamp_normalize(p.probs()), p);
  }
}

TEST(Sampling, EmpiricalFrequenciesWithinTv) {
  const auto op = sample_ordering_pair(16, 0.52, 4);
  const auto pair = h(TokenDistribution::uniform(16), 0.52, 0.7, op, EffectForm::kZipfProduct);
  for (int u = 0; u < 2; ++u) {
    const auto& p = pair.for_u(u);
    DiscreteSampler sampler(p.probs());
    Rng rng(100 + u);
    std::vector<double> freq(16, 0.0);
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) freq[sampler(rng)] += 1.0 / draws;
    EXPECT_LE(total_variation(freq, p.probs()), 0.01);
  }
}
