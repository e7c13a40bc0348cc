#pragma once

// Bag-of-words logistic regression: the p(U|T) measurement model, the
// p(A|C,T) propensity model, and the accuracy lens.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textcausal/random.hpp"
#include "textcausal/text.hpp"

namespace textcausal {

enum class FeatureMode { kCounts, kPresence };

// Sparse token counts over the vocabulary block [0, vocab_size), then dense
// covariates at vocab_size, vocab_size + 1, ...
struct BowFeatures {
  std::size_t vocab_size = 0;
  std::vector<std::uint32_t> indices;  // ascending, unique, < vocab_size
  std::vector<double> values;
  std::vector<double> covariates;

  [[nodiscard]] std::size_t dim() const { return vocab_size + covariates.size(); }
  // Dense copy, for tests and small inputs.
  [[nodiscard]] std::vector<double> dense() const;
};

BowFeatures featurize(const TokenSequence& tokens, const Vocab& vocab, std::span<const int> covariates = {},
                      FeatureMode mode = FeatureMode::kCounts);
BowFeatures featurize(const TokenSequence& tokens, std::size_t vocab_size, std::span<const int> covariates = {},
                      FeatureMode mode = FeatureMode::kCounts);

struct LogRegHyper {
  std::optional<double> l2;  // default 1/n
  double learning_rate = 0.1;
  std::size_t max_epochs = 500;
  double grad_tol = 1e-5;
};

struct LogisticModel {
  std::vector<double> weights;  // one per feature
  double intercept = 0.0;
  double l2 = 0.0;
  double learning_rate = 0.1;   // initial rate
  std::size_t max_epochs = 0;
  Seed seed = 0;
  std::size_t epochs = 0;       // accepted plus rejected steps
  bool converged = false;       // gradient norm reached the tolerance
  double final_grad_norm = 0.0;
  std::vector<double> loss_history;  // objective after each accepted step, starting at the initial point

  [[nodiscard]] double logit(const BowFeatures& x) const;
  [[nodiscard]] double predict_proba(const BowFeatures& x) const;
  // Threshold 0.5; a probability of exactly 0.5 is class 0.
  [[nodiscard]] int predict(const BowFeatures& x) const;

  // Flat key-value text, exact decimals.
  [[nodiscard]] std::string serialize() const;
  static LogisticModel deserialize(std::string_view text);
};

// Mean negative log-likelihood plus (l2/2)·|w|², intercept unpenalized.
double logreg_objective(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y);
// Gradient of logreg_objective; the last entry is the intercept.
std::vector<double> logreg_gradient(const LogisticModel& model, std::span<const BowFeatures> x,
                                    std::span<const int> y);

// Full-batch gradient descent from zero weights. A step that raises the
// objective is rejected and the rate halved, so loss_history never
// increases. Throws std::invalid_argument on fewer than two examples,
// mismatched sizes or a single label class. The seed is recorded only: the
// optimizer itself draws no randomness.
LogisticModel train_logreg(std::span<const BowFeatures> x, std::span<const int> y, const LogRegHyper& hyper = {},
                           Seed seed = 0);

double accuracy(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y);

struct ErrorRates {
  double fpr = 0.0;  // P(U*=1 | U=0)
  double fnr = 0.0;  // P(U*=0 | U=1)
  std::size_t negatives = 0;
  std::size_t positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

// Throws std::invalid_argument when either class is absent.
ErrorRates estimate_error_rates(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y);
ErrorRates error_rates_from_predictions(std::span<const int> predicted, std::span<const int> truth);

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

// Seeded permutation cut into train/dev/test; the default fractions give
// 8000/1000/1000 on 10000 records.
SplitSpec make_split(std::size_t n, Seed seed, double train_fraction = 0.8, double dev_fraction = 0.1);

}  // namespace textcausal
