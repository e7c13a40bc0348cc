// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "textcausal/dataset.hpp"
#include "textcausal/effects.hpp"
#include "textcausal/estimators.hpp"
#include "textcausal/harness.hpp"
#include "textcausal/io.hpp"
#include "textcausal/structured.hpp"
#include "textcausal/textgen.hpp"

using namespace textcausal;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  // Records one check; the detail keeps every failed check and the notes.
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("n/a"); }

class Clock {
 public:
  Clock() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::size_t cell_index(const ExperimentConfig& cfg, const std::string& label) {
  const auto probe = parse_config("dgp = " + std::string(to_string(cfg.dgp)) + "\ncells = " + label + "\n");
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    if (cfg.cells[i] == probe.cells[0]) return i;
  }
  throw std::logic_error("cell " + label + " is not in the grid");
}

std::optional<double> mean_error(const GridReport& r, std::size_t cell, const std::string& method,
                                 std::optional<std::size_t> budget = std::nullopt) {
  const auto s = r.summary(cell, method, budget);
  return s ? s->mean_abs_error : std::nullopt;
}

std::optional<double> mean_accuracy(const GridReport& r, std::size_t cell) {
  const auto s = r.summary(cell, "classification");
  return s ? s->mean_accuracy : std::nullopt;
}

std::optional<double> me_correlation(const GridReport& r) {
  for (const auto& c : accuracy_error_analysis(r)) {
    if (c.method == "measurement") return c.r;
  }
  return std::nullopt;
}

const char* kMethods = "methods = representation, propensity, ipw, measurement, oracle, naive\n";

ExperimentConfig trivial_config(const fs::path& out) {
  return parse_config(std::string("name = acceptance_trivial\ndgp = trivial\n") +
                      "cells = 0.1:0.1, 0.52:0.1, 0.84:0.1, 0.1:0.4, 0.52:0.4, 0.84:0.4, 0.1:0.7, 0.52:0.7, 0.84:0.7\n"
                      "structured_seeds = 0, 1, 2, 3\ntext_seeds = 0, 1, 2, 3\nn = 10000\n" +
                      kMethods + "vocab_size = 16\noutput = " + out.string() + "\n");
}

ExperimentConfig lda_config(const fs::path& out) {
  return parse_config(std::string("name = acceptance_lda\ndgp = lda\n") +
                      "cells = 0.1:0.1:0.1:0.1, 0.05:0.2:0.1:0.1, 0.1:0.2:0.1:0.1, 0.05:0.5:0.1:0.1,\n"
                      "  0.1:0.1:0.05:0.2, 0.05:0.2:0.05:0.2, 0.1:0.2:0.05:0.2, 0.05:0.5:0.05:0.2,\n"
                      "  0.1:0.1:0.1:0.2, 0.05:0.2:0.1:0.2, 0.1:0.2:0.1:0.2, 0.05:0.5:0.1:0.2,\n"
                      "  0.1:0.1:0.05:0.5, 0.05:0.2:0.05:0.5, 0.1:0.2:0.05:0.5, 0.05:0.5:0.05:0.5,\n"
                      "  0.05:0.5:0.1:0.5\n"
                      "structured_seeds = 0, 1\ntext_seeds = 0, 1\nn = 10000\n" +
                      kMethods + "lda.topics = 50\nlda.iterations = 500\nlda.documents = 3000\noutput = " +
                      out.string() + "\n");
}

const char* kSequentialCells =
    "cells = 0:0:0.45:0.7, 0.025:0.2:0.15:0.7, 0.025:0.2:0.45:0.7, 0.15:0.2:0.15:0.7,\n"
    "  0.05:0.5:0.05:0.5, 0.05:0.5:0.05:0.7, 0.05:0.5:0.45:0.7, 0.15:0.5:0.05:0.7,\n"
    "  0.15:0.5:0.15:0.9, 0.15:0.7:0.15:0.7, 0.15:0.7:0.15:0.9\n";

ExperimentConfig sequential_config(const fs::path& out) {
  return parse_config(std::string("name = acceptance_sequential\ndgp = sequential\n") + kSequentialCells +
                      "structured_seeds = 0, 1, 2, 3\ntext_seeds = 0, 1, 2, 3\nn = 10000\n" + kMethods +
                      "budgets = 50, 100, 200, 300, 400, 500, 1000, 1500, 2000, 2500, 5000\n"
                      "lm.order = 3\nlm.sentences = 20000\noutput = " + out.string() + "\n");
}

GridReport grid_with_time(const ExperimentConfig& cfg, double* seconds, GridProgress* progress = nullptr) {
  Clock clock;
  auto report = run_grid(cfg, progress);
  if (seconds) *seconds = clock.seconds();
  emit_report(report, cfg.output / "report");
  return report;
}

// ---------------------------------------------------------------------------

Verdict criterion_structured() {
  Verdict v;
  Clock clock;
  ExperimentConfig cfg;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto p = structured_for(cfg, s);
    const double oracle = oracle_ate(p);
    const double naive = naive_adjusted_ate(p);
    const double pu = p.p_u1();
    const bool ok = std::abs(oracle - 0.1) <= 1e-6 && std::abs(naive + 0.1) <= 1e-6 && std::abs(pu - 0.5) <= 1e-6;
    v.check(ok, "seed " + std::to_string(s) + " oracle " + fmt(oracle, 8) + " naive " + fmt(naive, 8) + " P(U=1) " +
                    fmt(pu, 8));
  }
  const double t = clock.seconds();
  v.check(t < 10.0, "time " + fmt(t, 2) + " s");
  return v;
}

Verdict criterion_h_function() {
  Verdict v;
  Clock clock;
  const std::size_t n = 16;
  Rng rng(derive_seed(0, "acceptance-h"));
  std::vector<double> raw(n);
  for (auto& x : raw) x = 0.05 + rng.uniform();
  const auto p = clamp_normalize(raw);

  double identity_gap = 0.0;
  for (double tau : {0.1, 0.52, 0.84}) {
    const auto op = sample_ordering_pair(n, tau, 1);
    for (auto form : {EffectForm::kEquation, EffectForm::kZipfProduct}) {
      const auto pair = h(p, tau, 0.0, op, form);
      for (std::size_t i = 0; i < n; ++i) {
        identity_gap = std::max({identity_gap, std::abs(pair.p0[i] - p[i]), std::abs(pair.p1[i] - p[i])});
      }
    }
  }
  v.check(identity_gap <= 1e-12, "delta=0 identity gap " + sci(identity_gap));

  bool equal = true;
  for (double delta : {0.1, 0.5, 0.9}) {
    for (auto form : {EffectForm::kEquation, EffectForm::kZipfProduct}) {
      const auto pair = h(p, 0.0, delta, sample_ordering_pair(n, 0.0, 2), form);
      equal = equal && pair.p0 == pair.p1;
    }
  }
  v.check(equal, "tau=0 gives p0 == p1");

  double worst = 0.0;
  for (double tau : {0.0, 0.1, 0.25, 0.5, 0.52, 0.84, 1.0}) {
    for (Seed seed = 0; seed < 100; ++seed) {
      const auto op = sample_ordering_pair(n, tau, seed);
      worst = std::max(worst, std::abs(kendall_tau(op.v0, op.v1) - (1.0 - 2.0 * tau)));
    }
  }
  v.check(worst <= 0.05, "max |kendall - (1-2tau)| over 100 seeds " + fmt(worst));

  const auto pair = h(p, 0.52, 0.7, sample_ordering_pair(n, 0.52, 3), EffectForm::kZipfProduct);
  double tv_worst = 0.0;
  for (int u = 0; u < 2; ++u) {
    const auto& dist = pair.for_u(u);
    DiscreteSampler sampler(dist.probs());
    Rng draw(derive_seed(0, "acceptance-tv", static_cast<std::uint64_t>(u)));
    std::vector<double> counts(n, 0.0);
    const std::size_t draws = 1'000'000;
    for (std::size_t k = 0; k < draws; ++k) counts[sampler(draw)] += 1.0;
    for (auto& c : counts) c /= static_cast<double>(draws);
    tv_worst = std::max(tv_worst, total_variation(counts, dist.probs()));
  }
  v.check(tv_worst <= 0.01, "1e6-draw TV " + fmt(tv_worst));
  const double t = clock.seconds();
  v.check(t < 60.0, "time " + fmt(t, 2) + " s");
  return v;
}

Verdict criterion_trivial_classification(const ExperimentConfig& cfg, const GridReport& report, double seconds) {
  Verdict v;
  const auto acc = [&](const std::string& label) { return mean_accuracy(report, cell_index(cfg, label)); };
  const auto weak = acc("0.1:0.1");
  const auto strong = acc("0.52:0.7");
  v.check(weak && *weak >= 0.50 && *weak <= 0.62, "accuracy(0.1,0.1) " + fmt_opt(weak));
  v.check(strong && *strong >= 0.99, "accuracy(0.52,0.7) " + fmt_opt(strong));
  const std::vector<std::string> taus{"0.1", "0.52", "0.84"};
  const std::vector<std::string> deltas{"0.1", "0.4", "0.7"};
  std::string worst_step;
  double worst_drop = -1.0;
  auto step = [&](const std::string& a, const std::string& b) {
    const auto x = acc(a);
    const auto y = acc(b);
    if (!x || !y) {
      worst_drop = 1.0;
      worst_step = a + "->" + b + " missing";
      return;
    }
    if (*x - *y > worst_drop) {
      worst_drop = *x - *y;
      worst_step = a + "->" + b;
    }
  };
  for (const auto& t : taus) {
    for (std::size_t d = 0; d + 1 < deltas.size(); ++d) step(t + ":" + deltas[d], t + ":" + deltas[d + 1]);
  }
  for (const auto& d : deltas) {
    for (std::size_t t = 0; t + 1 < taus.size(); ++t) step(taus[t] + ":" + d, taus[t + 1] + ":" + d);
  }
  v.check(worst_drop <= 0.03, "largest drop along rows/columns " + fmt(worst_drop) + " at " + worst_step);
  v.check(seconds < 600.0, "time " + fmt(seconds, 1) + " s");
  return v;
}

Verdict criterion_trivial_estimation(const ExperimentConfig& cfg, const GridReport& report, double seconds) {
  Verdict v;
  const auto strong = mean_error(report, cell_index(cfg, "0.52:0.7"), "measurement");
  v.check(strong && *strong <= 0.02, "ME error at (0.52,0.7) " + fmt_opt(strong));
  const std::size_t weak = cell_index(cfg, "0.1:0.1");
  for (const char* m : {"representation", "propensity", "ipw", "measurement"}) {
    const auto e = mean_error(report, weak, m);
    v.check(e && *e >= 0.14 && *e <= 0.25, std::string(m) + " at (0.1,0.1) " + fmt_opt(e));
  }
  std::size_t violations = 0;
  std::string first;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    const auto me = mean_error(report, c, "measurement");
    for (const char* other : {"ipw", "propensity", "representation"}) {
      const auto e = mean_error(report, c, other);
      if (!me || !e || *me > *e + 0.02) {
        if (violations++ == 0) {
          first = cfg.cells[c].label() + " ME " + fmt_opt(me) + " vs " + other + " " + fmt_opt(e);
        }
      }
    }
  }
  v.check(violations == 0, "ME <= IPW/matching + 0.02 at every cell (" + std::to_string(violations) + " violations" +
                               (first.empty() ? "" : ", first " + first) + ")");
  v.check(seconds < 1800.0, "time " + fmt(seconds, 1) + " s");
  return v;
}

Verdict criterion_oracle_ipw() {
  Verdict v;
  ExperimentConfig cfg;
  const auto p = structured_for(cfg, 0);
  const EstimatorConfig est;
  double sum = 0.0;
  double worst = 0.0;
  std::size_t over = 0;
  const std::size_t reps = 200;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto draws = draw_structured(p, 10000, derive_seed(0, "acceptance-ipw", r));
    std::vector<int> a, y;
    std::vector<double> score;
    for (const auto& s : draws) {
      a.push_back(s.a);
      y.push_back(s.y);
      score.push_back(p.a_given(s.c, s.u));
    }
    const double e = ipw_from_scores(a, y, score, est.ipw_lower, est.ipw_upper, 0, 0).point;
    sum += e;
    worst = std::max(worst, std::abs(e - 0.1));
    if (std::abs(e - 0.1) > 0.03) ++over;
  }
  const double mean = sum / static_cast<double>(reps);
  v.check(std::abs(mean - 0.1) <= 0.01, "mean over 200 replicates " + fmt(mean));
  v.check(worst <= 0.03, "max per-replicate |error| " + fmt(worst) + " (" + std::to_string(over) + " of 200 above 0.03)");
  return v;
}

Verdict criterion_measurement_inversion() {
  Verdict v;
  Rng rng(derive_seed(0, "acceptance-joints"));
  double worst = 0.0;
  std::size_t clamped = 0;
  for (int t = 0; t < 1000; ++t) {
    JointTable j;
    double z = 0.0;
    for (auto& m : j.mass) z += (m = rng.uniform() + 1e-3);
    for (auto& m : j.mass) m /= z;
    const double fpr = 0.4 * rng.uniform();
    const double fnr = 0.4 * rng.uniform();
    const auto back = correct_joint(corrupt_joint(j, fpr, fnr), fpr, fnr);
    clamped += back.clamped_cells;
    for (std::size_t k = 0; k < 16; ++k) worst = std::max(worst, std::abs(back.joint.mass[k] - j.mass[k]));
  }
  v.check(worst <= 1e-12 && clamped == 0,
          "round trip max error " + sci(worst) + " over 1000 joints, " + std::to_string(clamped) +
              " clamped cells");

  ExperimentConfig cfg;
  bool exact = true;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto draws = draw_structured(structured_for(cfg, s), 10000, derive_seed(0, "acceptance-perfect", s));
    const auto joint = JointTable::from_samples(draws);
    std::size_t fallbacks = 0;
    exact = exact && plug_in_ate_with_fallback(correct_joint(joint, 0.0, 0.0).joint, &fallbacks) == plug_in_ate(joint);
  }
  // End to end: text that spells out U gives a perfect classifier.
  TextEffectConfig effects;
  TrivialGenerator gen(Vocab::numbered(16), effects);
  auto ds = generate_dataset(structured_for(cfg, 1), gen, 4000, derive_seed(0, "acceptance-perfect-text"));
  for (auto& r : ds.records) r.tokens.ids.assign(8, static_cast<TokenId>(r.u));
  const auto [labeled, estimation] = crossfit_halves(ds.size(), 1);
  const auto split = measurement_error_split(ds.subset(labeled), ds.subset(estimation), EstimatorConfig{});
  exact = exact && split.estimate == plug_in_ate(ds.subset(estimation).structured());
  v.check(exact, "perfect classifier equals the true-U plug-in exactly");
  return v;
}

Verdict criterion_lda(const ExperimentConfig& cfg, const GridReport& report, double seconds) {
  Verdict v;
  const std::vector<std::string> chain{"0.1:0.1:0.1:0.1", "0.1:0.2:0.1:0.2", "0.05:0.5:0.1:0.5"};
  std::string trail;
  bool increasing = true;
  std::optional<double> previous;
  for (const auto& label : chain) {
    const auto a = mean_accuracy(report, cell_index(cfg, label));
    trail += (trail.empty() ? "" : " < ") + label + " " + fmt_opt(a);
    if (!a || (previous && !(*a > *previous))) increasing = false;
    previous = a;
  }
  v.check(increasing, "accuracy " + trail);
  const std::size_t strongest = cell_index(cfg, chain.back());
  const auto top = mean_accuracy(report, strongest);
  v.check(top && *top >= 0.9, "strongest-cell accuracy " + fmt_opt(top));
  const auto me = mean_error(report, strongest, "measurement");
  v.check(me && *me <= 0.05, "ME error at strongest cell " + fmt_opt(me));
  v.check(seconds < 3600.0, "time " + fmt(seconds, 1) + " s");
  return v;
}

Verdict criterion_sequential(const ExperimentConfig& cfg, const GridReport& report) {
  Verdict v;
  std::vector<double> acc, me;
  std::optional<std::size_t> strongest, weakest;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    const auto a = mean_accuracy(report, c);
    const auto e = mean_error(report, c, "measurement");
    if (!a || !e) continue;
    acc.push_back(*a);
    me.push_back(*e);
    if (!strongest || *a > *mean_accuracy(report, *strongest)) strongest = c;
    if (!weakest || *a < *mean_accuracy(report, *weakest)) weakest = c;
  }
  const auto r = pearson(acc, me);
  v.check(r && *r < 0.0, "pearson(cell accuracy, cell ME error) " + fmt_opt(r) + " over " +
                             std::to_string(acc.size()) + " cells");
  if (strongest && weakest) {
    const auto hi = *mean_error(report, *strongest, "measurement");
    const auto lo = *mean_error(report, *weakest, "measurement");
    v.check(hi < lo, "ME error weakest " + fmt(lo) + " -> strongest " + fmt(hi));
    v.check(hi <= 0.05, "ME error at strongest cell " + cfg.cells[*strongest].label() + " " + fmt(hi));
  } else {
    v.check(false, "no cell with both accuracy and ME error");
  }
  std::size_t weak_cells = 0;
  double lowest = 1.0;
  std::string lowest_at;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    const auto a = mean_accuracy(report, c);
    if (!a || *a >= 0.9) continue;
    ++weak_cells;
    for (const char* m : {"representation", "propensity", "ipw"}) {
      const auto e = mean_error(report, c, m);
      const double val = e ? *e : -1.0;
      if (val < lowest) {
        lowest = val;
        lowest_at = cfg.cells[c].label() + " " + m;
      }
    }
  }
  v.check(weak_cells > 0 && lowest >= 0.05, "smallest matching/IPW error over " + std::to_string(weak_cells) +
                                                " weak cells (accuracy < 0.9) " + fmt(lowest) + " at " + lowest_at);
  return v;
}

Verdict criterion_ablation(const ExperimentConfig& cfg, const GridReport& report, double seconds) {
  Verdict v;
  auto pooled = [&](const std::string& method, std::size_t budget) -> std::optional<double> {
    double sum = 0.0;
    std::size_t k = 0;
    for (const auto& r : report.runs) {
      if (r.method != method || r.budget != budget || !r.ok) continue;
      sum += r.report.abs_error;
      ++k;
    }
    if (k == 0) return std::nullopt;
    return sum / static_cast<double>(k);
  };
  const auto small = pooled("plugin_labeled", 50);
  const auto large = pooled("plugin_labeled", 2500);
  v.check(small && *small >= 0.15 && *small <= 0.45, "labeled baseline at n=50 " + fmt_opt(small));
  v.check(large && *large <= 0.03, "labeled baseline at n=2500 " + fmt_opt(large));
  std::size_t violations = 0;
  double worst = -1.0;
  std::string worst_at;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    std::optional<double> previous;
    std::size_t previous_budget = 0;
    for (std::size_t b : cfg.budgets) {
      const auto e = mean_error(report, c, "measurement", b);
      if (!e) continue;
      if (previous) {
        const double rise = *e - *previous;
        if (rise > 0.03) ++violations;
        if (rise > worst) {
          worst = rise;
          worst_at = cfg.cells[c].label() + " " + std::to_string(previous_budget) + "->" + std::to_string(b);
        }
      }
      previous = e;
      previous_budget = b;
    }
  }
  v.check(violations == 0, "ME error non-increasing in n within 0.03 (" + std::to_string(violations) +
                               " violations, largest rise " + fmt(worst) + " at " + worst_at + ")");
  std::string row;
  for (std::size_t b : cfg.budgets) row += (row.empty() ? "" : " ") + std::to_string(b) + ":" + fmt_opt(pooled("plugin_labeled", b));
  v.note("baseline row " + row);
  v.note("time " + fmt(seconds, 1) + " s");
  return v;
}

Verdict criterion_correlation(const GridReport& trivial, const GridReport& lda, const GridReport& sequential) {
  Verdict v;
  const auto t = me_correlation(trivial);
  const auto l = me_correlation(lda);
  const auto s = me_correlation(sequential);
  v.check(t && *t <= -0.3, "trivial ME r " + fmt_opt(t));
  v.check(l && *l <= -0.3, "lda ME r " + fmt_opt(l));
  v.check(s && *s <= -0.3, "sequential ME r " + fmt_opt(s));
  for (const auto* rep : {&trivial, &lda, &sequential}) {
    for (const auto& c : accuracy_error_analysis(*rep)) {
      if (c.method == "propensity" || c.method == "ipw") {
        v.note(c.dgp + " " + c.method + " r " + fmt_opt(c.r));
      }
    }
  }
  return v;
}

std::vector<std::pair<std::string, std::string>> tree_files(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_command(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Verdict criterion_determinism(const fs::path& root, const std::string& cli) {
  Verdict v;
  const auto base = root / "determinism";
  fs::remove_all(base);

  // Library level: two fresh grids with different worker counts.
  auto make = [&](const std::string& name, std::size_t workers) {
    auto cfg = parse_config(std::string("name = determinism\ndgp = trivial\ncells = 0.1:0.4, 0.52:0.7\n") +
                            "structured_seeds = 0, 1\ntext_seeds = 0\nn = 1000\n" + kMethods +
                            "ipw.bootstrap = 20\noutput = " + (base / name).string() + "\n");
    cfg.workers = workers;
    emit_report(run_grid(cfg), cfg.output / "report");
    return cfg;
  };
  const auto a = make("grid_a", 1);
  make("grid_b", 2);
  v.check(tree_files(base / "grid_a") == tree_files(base / "grid_b"), "grid rerun (1 vs 2 workers) byte-identical");

  emit_report(collect_report(a, false), base / "grid_a" / "report_again");
  v.check(tree_files(base / "grid_a" / "report") == tree_files(base / "grid_a" / "report_again"),
          "report re-emitted from run records byte-identical");

  bool records = true;
  for (const auto& e : fs::directory_iterator(base / "grid_a" / "runs")) {
    const auto text = read_file(e.path());
    records = records && serialize_run_record(parse_run_record(text)) == text;
  }
  const auto csv = read_file(base / "grid_a" / "report" / "estimates.csv");
  v.check(records && estimates_csv(parse_estimates_csv(csv)) == csv, "run records and estimates.csv round-trip");

  GeneratorFactory factory(a);
  const auto ds = make_dataset(factory, 1, 0, 0);
  write_dataset(base / "dataset.txt", ds);
  const auto text = read_file(base / "dataset.txt");
  const auto back = read_dataset(base / "dataset.txt");
  v.check(back.records == ds.records && serialize_dataset(back) == text, "dataset file round-trips exactly");

  if (cli.empty()) {
    v.note("command-line checks skipped (no --cli)");
    return v;
  }
  const std::string q = "'" + cli + "'";
  const auto d = base / "cli";
  fs::create_directories(d);
  bool ok = true;
  for (const char* tag : {"1", "2"}) {
    const auto out = (d / (std::string("gen") + tag + ".txt")).string();
    ok = ok && run_command(q + " generate --dgp sequential --tau-word 0.15 --delta-word 0.5 --tau-second 0.15 "
                               "--delta-second 0.9 --n 300 --seed 7 --out " + out) == 0;
    ok = ok && run_command(q + " estimate --method ipw --data " + out + " --seed 7 > " +
                           (d / (std::string("est") + tag + ".csv")).string()) == 0;
    ok = ok && run_command(q + " classify --data " + out + " --seed 7 > " +
                           (d / (std::string("cls") + tag + ".txt")).string()) == 0;
    ok = ok && run_command(q + " grid dgp=trivial cells=0.1:0.4,0.52:0.7 structured_seeds=0 text_seeds=0,1 n=800 "
                               "ipw.bootstrap=10 --seed 7 --output " + (d / (std::string("grid") + tag)).string()) == 0;
  }
  v.check(ok, "command-line runs succeed");
  const bool same = read_file(d / "gen1.txt") == read_file(d / "gen2.txt") &&
                    read_file(d / "est1.csv") == read_file(d / "est2.csv") &&
                    read_file(d / "cls1.txt") == read_file(d / "cls2.txt") &&
                    tree_files(d / "grid1") == tree_files(d / "grid2");
  v.check(ok && same, "generate/estimate/classify/grid reruns byte-identical");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria run"};
  fs::path out = "acceptance_out";
  std::string cli;
  bool fresh = false;
  app.add_option("--out", out, "Working directory for grids");
  app.add_option("--cli", cli, "Path of the textcausal executable");
  app.add_flag("--fresh", fresh, "Delete earlier run records first");
  CLI11_PARSE(app, argc, argv);
  if (fresh) fs::remove_all(out);
  fs::create_directories(out);

  int failures = 0;
  auto print = [&](int id, const char* title, const Verdict& v) {
    std::printf("criterion %2d %s  %s: %s\n", id, v.pass ? "PASS" : "FAIL", title, v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failures;
  };
  auto guarded = [&](int id, const char* title, const std::function<Verdict()>& fn) {
    try {
      print(id, title, fn());
    } catch (const std::exception& e) {
      Verdict v;
      v.check(false, std::string("exception: ") + e.what());
      print(id, title, v);
    }
  };

  guarded(1, "structured sampler", criterion_structured);
  guarded(2, "h-function suite", criterion_h_function);

  // Trivial grid: classification first so its time is measured alone.
  const auto trivial_cfg = trivial_config(out / "trivial");
  GridReport trivial;
  guarded(3, "trivial classification grid", [&] {
    auto cls = trivial_cfg;
    cls.methods.clear();
    double seconds = 0.0;
    const auto report = grid_with_time(cls, &seconds);
    return criterion_trivial_classification(cls, report, seconds);
  });
  guarded(4, "trivial estimation grid", [&] {
    double seconds = 0.0;
    GridProgress progress;
    trivial = grid_with_time(trivial_cfg, &seconds, &progress);
    auto v = criterion_trivial_estimation(trivial_cfg, trivial, seconds);
    v.note(std::to_string(progress.reused) + " classification records reused");
    return v;
  });
  guarded(5, "oracle-propensity IPW", criterion_oracle_ipw);
  guarded(6, "measurement-error inversion", criterion_measurement_inversion);

  const auto lda_cfg = lda_config(out / "lda");
  GridReport lda;
  guarded(7, "LDA desk-scale trend", [&] {
    double seconds = 0.0;
    lda = grid_with_time(lda_cfg, &seconds);
    return criterion_lda(lda_cfg, lda, seconds);
  });

  const auto seq_cfg = sequential_config(out / "sequential");
  GridReport sequential;
  guarded(8, "sequential-LM trend", [&] {
    double seconds = 0.0;
    sequential = grid_with_time(seq_cfg, &seconds);
    auto v = criterion_sequential(seq_cfg, sequential);
    v.note("time " + fmt(seconds, 1) + " s");
    return v;
  });
  guarded(9, "labeled-data ablation", [&] {
    Clock clock;
    const auto report = run_ablation(seq_cfg);
    const double seconds = clock.seconds();
    emit_report(report, seq_cfg.output / "ablation_report");
    return criterion_ablation(seq_cfg, report, seconds);
  });
  guarded(10, "accuracy/error correlation", [&] { return criterion_correlation(trivial, lda, sequential); });
  guarded(11, "determinism and serialization", [&] { return criterion_determinism(out, cli); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
