#pragma once

// Text-based causal effect estimators, cross-fitting, and the baselines
// they are scored against.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "textcausal/classify.hpp"
#include "textcausal/dataset.hpp"
#include "textcausal/lda.hpp"
#include "textcausal/matching.hpp"

namespace textcausal {

// An estimator declined to produce a number (near-singular correction,
// missing class, empty stratum).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EstimatorConfig {
  Seed seed = 0;
  LogRegHyper hyper;
  FeatureMode features = FeatureMode::kCounts;
  MatchingOptions matching;
  double ipw_lower = 0.05;
  double ipw_upper = 0.95;
  std::size_t bootstrap = 100;
  std::size_t rep_topics = 10;
  std::size_t rep_train_docs = 2000;
  std::size_t rep_iterations = 50;
  std::size_t rep_infer_sweeps = 20;
  double me_min_determinant = 0.05;

  // Stable hex digest of every field above except the seed.
  [[nodiscard]] std::string fingerprint() const;
};

struct EstimateReport {
  std::string method;
  std::string dgp;
  std::uint64_t structured_seed = 0;
  std::uint64_t text_seed = 0;
  double tau_word = 0.0;
  double delta_word = 0.0;
  std::optional<double> tau_second;
  std::optional<double> delta_second;
  std::size_t n = 0;
  double estimate = 0.0;
  double oracle = 0.0;
  double abs_error = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;

  // Not part of the CSV row.
  std::optional<double> classifier_accuracy;
  Seed seed = 0;
  std::string fingerprint;
  std::map<std::string, double> diagnostics;

  friend bool operator==(const EstimateReport&, const EstimateReport&) = default;
};

// Report skeleton carrying the dataset's identifiers and oracle.
EstimateReport make_report(const Dataset& dataset, std::string method, double estimate);

// Result of one estimator fit on a training part and applied to an
// estimation part.
struct SplitEstimate {
  double estimate = 0.0;
  std::optional<double> accuracy;
  std::vector<double> bootstrap;  // replicate estimates, when resampled
  std::map<std::string, double> diagnostics;
};

using SplitEstimator = std::function<SplitEstimate(const Dataset& train, const Dataset& estimation, Seed seed)>;

// Halves of a seeded permutation of 0..n-1: first = perm[0, n/2), second = the rest.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> crossfit_halves(std::size_t n, Seed seed);

// Fit on half one and estimate on half two, then swap; the report averages
// the two. Replicates, accuracies and diagnostics are averaged the same way.
// Throws EstimationError when a half lacks two records of each treatment arm.
EstimateReport crossfit(const Dataset& dataset, const SplitEstimator& estimator, const std::string& method,
                        Seed seed);

std::vector<BowFeatures> text_features(const Dataset& dataset, bool with_c, FeatureMode mode);

SplitEstimate propensity_match_split(const Dataset& train, const Dataset& estimation, const EstimatorConfig& cfg);
SplitEstimate representation_match_split(const Dataset& train, const Dataset& estimation,
                                         const EstimatorConfig& cfg, const LdaModel* fixed_model, Seed seed);
SplitEstimate ipw_split(const Dataset& train, const Dataset& estimation, const EstimatorConfig& cfg, Seed seed);
SplitEstimate measurement_error_split(const Dataset& labeled, const Dataset& estimation, const EstimatorConfig& cfg);

EstimateReport propensity_match_ate(const Dataset& dataset, const EstimatorConfig& cfg);
// Trains the representation LDA on each training half.
EstimateReport representation_match_ate(const Dataset& dataset, const EstimatorConfig& cfg);
// Uses one fixed LDA model for both halves.
EstimateReport representation_match_ate(const Dataset& dataset, const LdaModel& lda, const EstimatorConfig& cfg);
EstimateReport ipw_ate(const Dataset& dataset, const EstimatorConfig& cfg);
// With no budget, or a budget of half the dataset, this is the cross-fitted
// estimator. A budget n labels perm[0, n) and estimates on the rest, then
// labels perm[N-n, N) and estimates on perm[0, N-n), and averages.
EstimateReport measurement_error_ate(const Dataset& dataset, std::optional<std::size_t> labeled_budget,
                                     const EstimatorConfig& cfg);

// Matching with propensity scores: within each C stratum, full matching on
// |score_i - score_j|. Units of a stratum lacking an arm are dropped.
struct StratifiedMatch {
  double estimate = 0.0;
  std::size_t sets = 0;
  std::size_t dropped = 0;
  double total_cost = 0.0;
};
StratifiedMatch stratified_match(std::span<const int> c, std::span<const int> a, std::span<const int> y,
                                 const std::function<double(std::size_t, std::size_t)>& distance,
                                 const MatchingOptions& options);

struct IpwResult {
  double estimate = 0.0;   // mean of bootstrap replicates (point estimate when bootstrap = 0)
  double point = 0.0;      // stabilized estimate on the full sample
  std::vector<double> replicates;
};
// Scores are truncated into [lower, upper]; stabilized (normalized-weight)
// inverse-probability estimate of E[Y(1)] - E[Y(0)].
IpwResult ipw_from_scores(std::span<const int> a, std::span<const int> y, std::span<const double> scores,
                          double lower, double upper, std::size_t bootstrap, Seed seed);

// Misclassification: P(U*=1|U=0) = fpr, P(U*=0|U=1) = fnr.
JointTable corrupt_joint(const JointTable& joint, double fpr, double fnr);
struct CorrectedJoint {
  JointTable joint;
  std::size_t clamped_cells = 0;
};
// Inverts the 2x2 misclassification matrix in every (c, a, y) cell. Negative
// masses are clamped to zero and the cell rescaled to its observed total.
// Throws EstimationError when |1 - fpr - fnr| < min_determinant.
CorrectedJoint correct_joint(const JointTable& observed, double fpr, double fnr, double min_determinant = 0.05);

// Identification formula on a corrected joint. A (c, u) stratum that has
// mass but lost one arm to clamping uses that arm's P(Y | A, C) pooled over
// U; each such substitution is counted in *fallbacks.
double plug_in_ate_with_fallback(const JointTable& joint, std::size_t* fallbacks);

// Percentile interval of a sample (linear interpolation).
std::pair<double, double> percentile_interval(std::vector<double> values, double level = 0.95);

// oracle, naive (C-adjusted), unadjusted and, when a budget is given, the
// plug-in estimate on perm[0, n) with true U ("plugin_labeled"); an emptied
// (c, u) arm falls back to P(Y | A, C) pooled over U.
// A failing baseline is omitted and named in the returned failures.
struct BaselineResults {
  std::vector<EstimateReport> reports;
  std::vector<std::pair<std::string, std::string>> failures;
};
BaselineResults baseline_suite(const Dataset& dataset, std::optional<std::size_t> labeled_budget,
                               const EstimatorConfig& cfg);

// Runs one estimator or baseline by name: representation, propensity, ipw,
// measurement, oracle, naive, unadjusted or plugin_labeled. lda, when given,
// is the fixed representation model. Throws std::invalid_argument for an
// unknown name and EstimationError when the method fails.
EstimateReport estimate_by_name(const Dataset& dataset, const std::string& method,
                                std::optional<std::size_t> labeled_budget, const EstimatorConfig& cfg,
                                const LdaModel* lda = nullptr);

}  // namespace textcausal
