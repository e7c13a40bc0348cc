#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "textcausal/classify.hpp"
#include "textcausal/corpus.hpp"
#include "textcausal/dataset.hpp"
#include "textcausal/estimators.hpp"
#include "textcausal/harness.hpp"
#include "textcausal/io.hpp"
#include "textcausal/lda.hpp"
#include "textcausal/parallel.hpp"

namespace tc = textcausal;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  int verbosity = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

void add_common(CLI::App* app, Common& c, bool overrides = true) {
  app->add_option("--config", c.config, "Experiment config file (key = value lines)")->check(CLI::ExistingFile);
  if (overrides) app->add_option("overrides", c.overrides, "Config overrides as key=value");
  c.seed_opt = app->add_option("--seed", c.seed, "Master seed, the only source of randomness");
  c.workers_opt = app->add_option("--workers", c.workers, "Worker threads (0: all cores)");
  app->add_flag("-v,--verbose", c.verbosity, "Progress on stderr (repeat for more)");
}

tc::ExperimentConfig build_config(const Common& c) {
  try {
    tc::ExperimentConfig cfg = c.config.empty() ? tc::ExperimentConfig{} : tc::load_config(c.config);
    for (const auto& o : c.overrides) tc::apply_override(cfg, o);
    if (c.seed_opt->count()) cfg.master_seed = c.seed;
    if (c.workers_opt->count()) cfg.workers = tc::resolve_workers(c.workers);
    return cfg;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void log(const Common& c, int level, const std::string& msg) {
  if (c.verbosity >= level) std::cerr << msg << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_summaries(const tc::GridReport& report) {
  std::printf("%-6s %-44s %-15s %-7s %5s %5s %10s %10s\n", "cell", "effects", "method", "budget", "runs", "fail",
              "abs_error", "accuracy");
  for (const auto& s : report.summaries()) {
    std::printf("%-6zu %-44s %-15s %-7s %5zu %5zu %10s %10s\n", s.cell,
                report.config.cells[s.cell].label().c_str(), s.method.c_str(),
                s.budget ? std::to_string(*s.budget).c_str() : "-", s.runs, s.failures,
                s.mean_abs_error ? tc::format_double(*s.mean_abs_error).substr(0, 10).c_str() : "-",
                s.mean_accuracy ? tc::format_double(*s.mean_accuracy).substr(0, 10).c_str() : "-");
  }
  for (const auto& c : tc::accuracy_error_analysis(report)) {
    std::printf("pearson(accuracy, abs_error) %s/%s over %zu runs: %s\n", c.dgp.c_str(), c.method.c_str(), c.points,
                c.r ? tc::format_double(*c.r).c_str() : "undefined");
  }
}

std::size_t count_failures(const tc::GridReport& report) {
  std::size_t n = 0;
  for (const auto& r : report.runs) n += r.ok ? 0 : 1;
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-text causal inference benchmark"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // generate ---------------------------------------------------------------
  Common gen_c;
  std::string gen_dgp = "trivial", gen_out, gen_form = "zipf-product";
  double tau_w = 0.0, delta_w = 0.0, tau_s = 0.0, delta_s = 0.0;
  std::size_t gen_n = 10000;
  std::uint64_t gen_struct = 0, gen_text = 0;
  auto* gen = app.add_subcommand("generate", "Generate one dataset file");
  gen->option_defaults()->always_capture_default();
  add_common(gen, gen_c);
  auto* o_dgp = gen->add_option("--dgp", gen_dgp, "trivial | lda | sequential");
  gen->add_option("--tau-word", tau_w, "Word effect: Kendall tau target");
  gen->add_option("--delta-word", delta_w, "Word effect: rank-reweighting strength delta in [0, 1]");
  auto* o_ts = gen->add_option("--tau-second", tau_s, "Topic/template effect: Kendall tau target");
  auto* o_ds = gen->add_option("--delta-second", delta_s, "Topic/template effect: rank-reweighting strength delta in [0, 1]");
  auto* o_n = gen->add_option("--n", gen_n, "Number of records");
  auto* o_form = gen->add_option("--effect-form", gen_form, "equation | zipf-product");
  gen->add_option("--structured-seed", gen_struct, "Structured seed value");
  gen->add_option("--text-seed", gen_text, "Text seed value");
  gen->add_option("--out", gen_out, "Output dataset path")->required();

  // train-lda --------------------------------------------------------------
  Common lda_c;
  std::string lda_out, lda_corpus;
  auto* lda = app.add_subcommand("train-lda", "Train an LDA model and write it to a file");
  lda->option_defaults()->always_capture_default();
  add_common(lda, lda_c);
  lda->add_option("--corpus", lda_corpus, "Plain-text corpus, one document per line (default: bundled topical corpus)")
      ->check(CLI::ExistingFile);
  lda->add_option("--out", lda_out, "Output model path")->required();

  // classify ---------------------------------------------------------------
  Common cls_c;
  std::string cls_data, cls_target = "u", cls_model_out;
  auto* cls = app.add_subcommand("classify", "Train and score a bag-of-words logistic classifier on a dataset");
  cls->option_defaults()->always_capture_default();
  add_common(cls, cls_c);
  cls->add_option("--data", cls_data, "Dataset file")->required()->check(CLI::ExistingFile);
  cls->add_option("--target", cls_target, "Label to predict: u | a")->check(CLI::IsMember({"u", "a"}));
  cls->add_option("--model-out", cls_model_out, "Write the trained model here");

  // estimate ---------------------------------------------------------------
  Common est_c;
  std::string est_method, est_data, est_out, est_lda;
  std::size_t est_labeled = 0;
  auto* est = app.add_subcommand("estimate", "Run one estimator on a dataset and print an estimate CSV row");
  est->option_defaults()->always_capture_default();
  add_common(est, est_c);
  est->add_option("--method", est_method,
                  "representation | propensity | ipw | measurement | oracle | naive | unadjusted | plugin_labeled")
      ->required()
      ->check(CLI::IsMember({"representation", "propensity", "ipw", "measurement", "oracle", "naive", "unadjusted",
                             "plugin_labeled"}));
  est->add_option("--data", est_data, "Dataset file")->required()->check(CLI::ExistingFile);
  auto* o_labeled = est->add_option("--labeled", est_labeled, "Labeled budget for measurement / plugin_labeled (0: half)");
  est->add_option("--lda-model", est_lda, "Fixed LDA model for representation matching")->check(CLI::ExistingFile);
  est->add_option("--out", est_out, "Also write the CSV here");

  // grid / ablate / report -------------------------------------------------
  Common grid_c, abl_c, rep_c;
  std::string grid_output, abl_output, rep_output;
  bool rep_ablation = false;
  auto* grid = app.add_subcommand("grid", "Run an experiment grid (resumable) and write the report");
  grid->option_defaults()->always_capture_default();
  add_common(grid, grid_c);
  auto* o_grid_out = grid->add_option("--output", grid_output, "Output directory (overrides the config)");
  auto* abl = app.add_subcommand("ablate", "Run the labeled-budget ablation (resumable) and write the report");
  abl->option_defaults()->always_capture_default();
  add_common(abl, abl_c);
  auto* o_abl_out = abl->add_option("--output", abl_output, "Output directory (overrides the config)");
  auto* rep = app.add_subcommand("report", "Rebuild the report CSVs from existing run records");
  rep->option_defaults()->always_capture_default();
  add_common(rep, rep_c);
  auto* o_rep_out = rep->add_option("--output", rep_output, "Output directory (overrides the config)");
  rep->add_flag("--ablation", rep_ablation, "The records belong to an ablation run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      auto cfg = build_config(gen_c);
      try {
        if (o_dgp->count() || gen_c.config.empty()) cfg.dgp = tc::dgp_from_string(gen_dgp);
        if (o_n->count() || gen_c.config.empty()) cfg.n = gen_n;
        if (o_form->count()) cfg.form = tc::effect_form_from_string(gen_form);
        tc::EffectCell cell{{tau_w, delta_w}, std::nullopt};
        if (o_ts->count() || o_ds->count() || cfg.dgp != tc::DgpKind::kTrivial) {
          cell.second = tc::EffectParams{tau_s, delta_s};
        }
        cfg.cells = {cell};
        cfg.structured_seeds = {gen_struct};
        cfg.text_seeds = {gen_text};
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto t0 = std::chrono::steady_clock::now();
      tc::GeneratorFactory factory(cfg);
      const auto ds = tc::make_dataset(factory, 0, 0, 0);
      tc::write_dataset(gen_out, ds);
      log(gen_c, 1, "wrote " + std::to_string(ds.size()) + " records to " + gen_out + " in " +
                        tc::format_double(seconds_since(t0)) + " s");
      return 0;
    }

    if (*lda) {
      auto cfg = build_config(lda_c);
      tc::Corpus corpus;
      if (lda_corpus.empty()) {
        corpus = tc::topical_corpus(cfg.lda_documents, 0);
      } else {
        std::vector<std::vector<std::string>> docs;
        std::vector<std::string> tokens;
        std::map<std::string, bool> seen;
        for (const auto& line : tc::split(tc::read_file(lda_corpus), '\n')) {
          auto words = tc::tokenize(line);
          if (words.empty()) continue;
          for (const auto& w : words) {
            if (seen.emplace(w, true).second) tokens.push_back(w);
          }
          docs.push_back(std::move(words));
        }
        corpus.id = "file:" + lda_corpus;
        corpus.vocab = tc::Vocab(tokens);
        for (const auto& d : docs) {
          tc::TokenSequence seq;
          for (const auto& w : d) seq.ids.push_back(corpus.vocab.id(w));
          corpus.documents.push_back(std::move(seq));
        }
      }
      tc::LdaOptions opt;
      opt.n_topics = cfg.lda_topics;
      opt.alpha = cfg.lda_alpha;
      opt.beta = cfg.lda_beta;
      opt.iterations = cfg.lda_iterations;
      opt.seed = tc::derive_seed(cfg.master_seed, "lda");
      opt.corpus_id = corpus.id;
      const auto t0 = std::chrono::steady_clock::now();
      const auto model = tc::train_lda(corpus.documents, corpus.vocab, opt);
      tc::write_file_atomic(lda_out, model.serialize());
      log(lda_c, 1, "trained " + std::to_string(opt.n_topics) + " topics on " + std::to_string(corpus.documents.size()) +
                        " documents in " + tc::format_double(seconds_since(t0)) + " s");
      return 0;
    }

    if (*cls) {
      auto cfg = build_config(cls_c);
      const auto ds = tc::read_dataset(cls_data);
      const auto split = tc::make_split(ds.size(), cfg.master_seed);
      const auto x = tc::text_features(ds, false, cfg.estimator.features);
      auto label = [&](std::size_t i) { return cls_target == "u" ? ds.records[i].u : ds.records[i].a; };
      std::vector<tc::BowFeatures> xt, xe;
      std::vector<int> yt, ye;
      for (std::size_t i : split.train) xt.push_back(x[i]), yt.push_back(label(i));
      for (std::size_t i : split.test) xe.push_back(x[i]), ye.push_back(label(i));
      const auto model = tc::train_logreg(xt, yt, cfg.estimator.hyper, cfg.master_seed);
      const auto rates = tc::estimate_error_rates(model, xe, ye);
      std::printf("target = %s\ntrain = %zu\ntest = %zu\naccuracy = %s\nfpr = %s\nfnr = %s\nepochs = %zu\nconverged = %s\n",
                  cls_target.c_str(), xt.size(), xe.size(), tc::format_double(tc::accuracy(model, xe, ye)).c_str(),
                  tc::format_double(rates.fpr).c_str(), tc::format_double(rates.fnr).c_str(), model.epochs,
                  model.converged ? "true" : "false");
      if (!cls_model_out.empty()) tc::write_file_atomic(cls_model_out, model.serialize());
      return 0;
    }

    if (*est) {
      auto cfg = build_config(est_c);
      const auto ds = tc::read_dataset(est_data);
      tc::EstimatorConfig ec = cfg.estimator;
      ec.seed = cfg.master_seed;
      std::optional<std::size_t> budget;
      if (o_labeled->count() && est_labeled > 0) budget = est_labeled;
      std::optional<tc::LdaModel> lda;
      if (!est_lda.empty()) lda = tc::LdaModel::deserialize(tc::read_file(est_lda));
      const auto report = tc::estimate_by_name(ds, est_method, budget, ec, lda ? &*lda : nullptr);
      const std::string csv = tc::estimates_csv({report});
      std::fputs(csv.c_str(), stdout);
      if (!est_out.empty()) tc::write_file_atomic(est_out, csv);
      for (const auto& [k, v] : report.diagnostics) log(est_c, 1, k + " = " + tc::format_double(v));
      return 0;
    }

    auto run = [&](Common& c, CLI::Option* out_opt, const std::string& out, bool ablation, bool collect) {
      auto cfg = build_config(c);
      if (out_opt->count()) cfg.output = out;
      try {
        cfg.validate();
        if (ablation && cfg.budgets.empty()) throw std::invalid_argument("config: ablation needs budgets");
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto t0 = std::chrono::steady_clock::now();
      tc::GridProgress progress;
      tc::GridReport report = collect ? tc::collect_report(cfg, ablation)
                              : ablation ? tc::run_ablation(cfg, &progress)
                                         : tc::run_grid(cfg, &progress);
      tc::emit_report(report, cfg.output / "report");
      log(c, 1, "executed " + std::to_string(progress.executed) + " runs, reused " + std::to_string(progress.reused) +
                    ", " + std::to_string(count_failures(report)) + " failed, " +
                    tc::format_double(seconds_since(t0)) + " s");
      print_summaries(report);
      return 0;
    };
    if (*grid) return run(grid_c, o_grid_out, grid_output, false, false);
    if (*abl) return run(abl_c, o_abl_out, abl_output, true, false);
    if (*rep) return run(rep_c, o_rep_out, rep_output, rep_ablation, true);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
