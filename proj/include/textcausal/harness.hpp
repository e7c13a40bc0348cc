#pragma once

// Experiment grids over (effect cell x structured seed x text seed x method),
// the accuracy/error correlation analysis, and the labeled-data ablation.
//
// Config files are UTF-8 text, one "key = value" per line, '#' comments.
// See configs/ for the bundled presets and README.md for the key list.
//
// Run records live in <output>/runs/<digest>.json, one file per
// (cell, structured seed, text seed, method, budget); the digest hashes
// everything that determines the record, so finished runs are reused when a
// grid is resumed.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "textcausal/classify.hpp"
#include "textcausal/estimators.hpp"
#include "textcausal/textgen.hpp"

namespace textcausal {

struct EffectCell {
  EffectParams word;
  std::optional<EffectParams> second;

  [[nodiscard]] std::string label() const;
  friend bool operator==(const EffectCell&, const EffectCell&) = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DgpKind dgp = DgpKind::kTrivial;
  std::vector<EffectCell> cells;
  std::vector<std::uint64_t> structured_seeds{0, 1, 2, 3};
  std::vector<std::uint64_t> text_seeds{0, 1, 2, 3};
  std::size_t n = 10000;
  std::vector<std::string> methods{"representation", "propensity", "ipw", "measurement"};
  bool classification = true;  // also record the 8k/1k/1k p(U|T) test accuracy
  std::vector<std::size_t> budgets;
  EffectForm form = EffectForm::kZipfProduct;
  std::size_t length = 0;  // 0: 16 for trivial, 32 otherwise
  std::size_t vocab_size = 16;

  std::size_t lda_topics = 50;
  double lda_alpha = 0.1;
  double lda_beta = 0.01;
  std::size_t lda_iterations = 500;
  std::size_t lda_documents = 3000;
  std::string lda_model;  // load instead of training when set

  std::size_t lm_order = 3;
  double lm_smoothing = 0.01;
  std::size_t lm_sentences = 20000;
  std::string lm_bridge;  // whitespace-separated command; built-in n-gram LM when empty

  EstimatorConfig estimator;
  std::filesystem::path output = "out";
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;

  [[nodiscard]] std::size_t effective_length() const;
  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  // Every key with its current value, in documentation order.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const;
  [[nodiscard]] std::string to_text() const;
  // to_text() without output and workers, which never change results.
  [[nodiscard]] std::string experiment_text() const;
};

// Throws std::invalid_argument on unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void apply_override(ExperimentConfig& cfg, const std::string& assignment);  // "key=value"
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::vector<std::string> config_keys();

struct RunRecord {
  std::size_t cell = 0;
  std::size_t structured_index = 0;
  std::size_t text_index = 0;
  std::string method;  // estimator, baseline, or "classification"
  std::optional<std::size_t> budget;
  bool ok = false;
  std::string error;
  EstimateReport report;         // estimators and baselines
  std::optional<double> accuracy;  // classification: test accuracy

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct CellSummary {
  std::size_t cell = 0;
  std::string method;
  std::optional<std::size_t> budget;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::optional<double> mean_abs_error;
  std::optional<double> mean_estimate;
  std::optional<double> mean_accuracy;
  std::optional<double> ci_low;   // bootstrap interval of the mean absolute error
  std::optional<double> ci_high;
};

struct GridReport {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // stable order: cell, method, budget, structured, text

  [[nodiscard]] std::vector<CellSummary> summaries() const;
  [[nodiscard]] std::optional<CellSummary> summary(std::size_t cell, const std::string& method,
                                                   std::optional<std::size_t> budget = std::nullopt) const;
};

struct Correlation {
  std::string dgp;
  std::string method;
  std::size_t points = 0;
  std::optional<double> r;  // empty when either series has zero variance
};

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Seed for one run; identical inputs always give the identical seed.
Seed run_seed(const ExperimentConfig& cfg, std::size_t cell, std::size_t structured_index, std::size_t text_index,
              const std::string& method);
Seed dataset_seed(const ExperimentConfig& cfg, std::size_t cell, std::size_t structured_index,
                  std::size_t text_index);
StructuredParams structured_for(const ExperimentConfig& cfg, std::size_t structured_index);

// Builds the text generator for one cell and text seed. Shared models (LDA,
// language model) are created once per process and cached.
class GeneratorFactory {
 public:
  explicit GeneratorFactory(const ExperimentConfig& cfg);
  ~GeneratorFactory();
  std::unique_ptr<TextGenerator> make(std::size_t cell, std::size_t text_index);
  [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }

 private:
  struct Shared;
  ExperimentConfig cfg_;
  std::unique_ptr<Shared> shared_;
};

Dataset make_dataset(GeneratorFactory& factory, std::size_t cell, std::size_t structured_index,
                     std::size_t text_index);

struct GridProgress {
  std::size_t executed = 0;
  std::size_t reused = 0;
};

// Runs every configured method (and the classification accuracy) on every
// dataset of the grid. Failures are recorded, never thrown.
GridReport run_grid(const ExperimentConfig& cfg, GridProgress* progress = nullptr);

// Measurement-error estimator and labeled plug-in baseline at every budget.
GridReport run_ablation(const ExperimentConfig& cfg, GridProgress* progress = nullptr);

// Assembles a report from existing run records only; throws
// std::runtime_error when any record is missing.
GridReport collect_report(const ExperimentConfig& cfg, bool ablation);

// Pearson r between classifier accuracy and absolute error per method.
std::vector<Correlation> accuracy_error_analysis(const GridReport& report);

// Writes estimates.csv, table_errors.csv, table_accuracy.csv, scatter.csv,
// correlation.csv, table_errors_wide.csv and failures.csv into dir.
void emit_report(const GridReport& report, const std::filesystem::path& dir);

// CSV with the EstimateReport schema.
std::string estimates_csv(const std::vector<EstimateReport>& reports);
std::vector<EstimateReport> parse_estimates_csv(std::string_view text);
inline constexpr const char* kEstimateCsvHeader =
    "method,dgp,structured_seed,text_seed,tau_word,delta_word,tau_second,delta_second,n,estimate,oracle,abs_error,"
    "ci_low,ci_high";

// Run record (de)serialization, exposed for tests.
std::string serialize_run_record(const RunRecord& record);
RunRecord parse_run_record(std::string_view text);

}  // namespace textcausal
