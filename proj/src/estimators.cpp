#include "textcausal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace textcausal {

std::string EstimatorConfig::fingerprint() const {
  SeedHasher h(0);
  h.add(hyper.l2.value_or(-1.0)).add(hyper.learning_rate).add(static_cast<std::uint64_t>(hyper.max_epochs));
  h.add(hyper.grad_tol).add(static_cast<int>(features));
  h.add(static_cast<std::uint64_t>(matching.max_candidates)).add(static_cast<std::uint64_t>(matching.exact_limit));
  h.add(ipw_lower).add(ipw_upper).add(static_cast<std::uint64_t>(bootstrap));
  h.add(static_cast<std::uint64_t>(rep_topics)).add(static_cast<std::uint64_t>(rep_train_docs));
  h.add(static_cast<std::uint64_t>(rep_iterations)).add(static_cast<std::uint64_t>(rep_infer_sweeps));
  h.add(me_min_determinant);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.finish()));
  return buf;
}

EstimateReport make_report(const Dataset& dataset, std::string method, double estimate) {
  const auto& m = dataset.meta;
  EstimateReport r;
  r.method = std::move(method);
  r.dgp = to_string(m.dgp);
  r.structured_seed = m.structured.seed;
  r.text_seed = m.effects.ordering_seed;
  r.tau_word = m.effects.word.tau;
  r.delta_word = m.effects.word.delta;
  if (m.effects.second) {
    r.tau_second = m.effects.second->tau;
    r.delta_second = m.effects.second->delta;
  }
  r.n = dataset.size();
  r.estimate = estimate;
  r.oracle = oracle_ate(m.structured);
  r.abs_error = std::abs(estimate - r.oracle);
  return r;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> crossfit_halves(std::size_t n, Seed seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "crossfit"));
  rng.shuffle(perm);
  const auto mid = static_cast<std::ptrdiff_t>(n / 2);
  return {std::vector<std::size_t>(perm.begin(), perm.begin() + mid),
          std::vector<std::size_t>(perm.begin() + mid, perm.end())};
}

namespace {

void require_arms(const Dataset& part, const char* which) {
  std::size_t arm[2] = {0, 0};
  for (const auto& r : part.records) ++arm[r.a];
  if (arm[0] < 2 || arm[1] < 2) {
    throw EstimationError(std::string(which) + " needs at least two treated and two control records");
  }
}

SplitEstimate average(const SplitEstimate& x, const SplitEstimate& y) {
  SplitEstimate out;
  out.estimate = 0.5 * (x.estimate + y.estimate);
  if (x.accuracy && y.accuracy) out.accuracy = 0.5 * (*x.accuracy + *y.accuracy);
  if (!x.bootstrap.empty() && x.bootstrap.size() == y.bootstrap.size()) {
    for (std::size_t b = 0; b < x.bootstrap.size(); ++b) out.bootstrap.push_back(0.5 * (x.bootstrap[b] + y.bootstrap[b]));
  }
  for (const auto& [k, v] : x.diagnostics) {
    auto it = y.diagnostics.find(k);
    out.diagnostics[k] = it == y.diagnostics.end() ? v : 0.5 * (v + it->second);
  }
  for (const auto& [k, v] : y.diagnostics) out.diagnostics.emplace(k, v);
  return out;
}

EstimateReport finish(const Dataset& dataset, const std::string& method, const SplitEstimate& e, Seed seed) {
  EstimateReport r = make_report(dataset, method, e.estimate);
  r.classifier_accuracy = e.accuracy;
  if (!e.bootstrap.empty()) {
    const auto [lo, hi] = percentile_interval(e.bootstrap);
    r.ci_low = lo;
    r.ci_high = hi;
  }
  r.diagnostics = e.diagnostics;
  r.seed = seed;
  return r;
}

std::vector<int> column(const Dataset& d, int StructuredSample::*field) {
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& r : d.records) out.push_back(r.structured().*field);
  return out;
}

std::vector<int> labels_u(const Dataset& d) { return column(d, &StructuredSample::u); }
std::vector<int> labels_a(const Dataset& d) { return column(d, &StructuredSample::a); }

// p(A | C, T) fitted on train, scored on estimation.
struct Propensity {
  std::vector<double> scores;
  double accuracy = 0.0;
  std::size_t epochs = 0;
};

Propensity fit_propensity(const Dataset& train, const Dataset& estimation, const EstimatorConfig& cfg) {
  const auto xt = text_features(train, true, cfg.features);
  const auto model = train_logreg(xt, labels_a(train), cfg.hyper, cfg.seed);
  const auto xe = text_features(estimation, true, cfg.features);
  Propensity p;
  p.scores.reserve(xe.size());
  for (const auto& f : xe) p.scores.push_back(model.predict_proba(f));
  p.accuracy = accuracy(model, xe, labels_a(estimation));
  p.epochs = model.epochs;
  return p;
}

}  // namespace

EstimateReport crossfit(const Dataset& dataset, const SplitEstimator& estimator, const std::string& method,
                        Seed seed) {
  const auto [first, second] = crossfit_halves(dataset.size(), seed);
  const Dataset d1 = dataset.subset(first);
  const Dataset d2 = dataset.subset(second);
  require_arms(d1, "first cross-fitting half");
  require_arms(d2, "second cross-fitting half");
  const SplitEstimate e1 = estimator(d1, d2, derive_seed(seed, "fold", 1));
  const SplitEstimate e2 = estimator(d2, d1, derive_seed(seed, "fold", 2));
  return finish(dataset, method, average(e1, e2), seed);
}

std::vector<BowFeatures> text_features(const Dataset& dataset, bool with_c, FeatureMode mode) {
  std::vector<BowFeatures> out;
  out.reserve(dataset.size());
  const std::size_t v = dataset.meta.vocab.size();
  for (const auto& r : dataset.records) {
    const int c[1] = {r.c};
    out.push_back(featurize(r.tokens, v, with_c ? std::span<const int>(c) : std::span<const int>(), mode));
  }
  return out;
}

StratifiedMatch stratified_match(std::span<const int> c, std::span<const int> a, std::span<const int> y,
                                 const std::function<double(std::size_t, std::size_t)>& distance,
                                 const MatchingOptions& options) {
  MatchedGroups all;
  for (int level = 0; level < 2; ++level) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] == level) members.push_back(i);
    }
    if (members.empty()) continue;
    std::vector<int> treated;
    for (std::size_t i : members) treated.push_back(a[i]);
    const auto local = full_match(treated, [&](std::size_t i, std::size_t j) { return distance(members[i], members[j]); },
                                  options);
    all.dropped += local.dropped;
    all.total_cost += local.total_cost;
    for (const auto& s : local.sets) {
      MatchedSet g;
      g.cost = s.cost;
      for (std::size_t i : s.treated) g.treated.push_back(members[i]);
      for (std::size_t j : s.control) g.control.push_back(members[j]);
      all.sets.push_back(std::move(g));
    }
  }
  if (all.sets.empty()) throw EstimationError("no C stratum contains both treated and control records");
  StratifiedMatch out;
  out.estimate = matched_effect(all, y);
  out.sets = all.sets.size();
  out.dropped = all.dropped;
  out.total_cost = all.total_cost;
  return out;
}

SplitEstimate propensity_match_split(const Dataset& train, const Dataset& estimation, const EstimatorConfig& cfg) {
  const Propensity p = fit_propensity(train, estimation, cfg);
  const auto m = stratified_match(
      column(estimation, &StructuredSample::c), labels_a(estimation), column(estimation, &StructuredSample::y),
      [&](std::size_t i, std::size_t j) { return std::abs(p.scores[i] - p.scores[j]); }, cfg.matching);
  SplitEstimate e;
  e.estimate = m.estimate;
  e.accuracy = p.accuracy;
  e.diagnostics["matched_sets"] = static_cast<double>(m.sets);
  e.diagnostics["dropped_units"] = static_cast<double>(m.dropped);
  e.diagnostics["propensity_epochs"] = static_cast<double>(p.epochs);
  return e;
}

SplitEstimate representation_match_split(const Dataset& train, const Dataset& estimation,
                                         const EstimatorConfig& cfg, const LdaModel* fixed_model, Seed seed) {
  LdaModel trained;
  if (!fixed_model) {
    std::vector<TokenSequence> docs;
    for (std::size_t i = 0; i < train.size() && docs.size() < cfg.rep_train_docs; ++i) {
      docs.push_back(train.records[i].tokens);
    }
    LdaOptions opt;
    opt.n_topics = cfg.rep_topics;
    opt.iterations = cfg.rep_iterations;
    opt.seed = derive_seed(seed, "representation-lda");
    opt.corpus_id = "estimation-train-half";
    trained = train_lda(docs, train.meta.vocab, opt);
    fixed_model = &trained;
  }
  const Seed infer_seed = derive_seed(seed, "representation-infer");
  std::vector<std::vector<double>> rep;
  std::size_t empty_docs = 0;
  rep.reserve(estimation.size());
  for (std::size_t i = 0; i < estimation.size(); ++i) {
    auto t = infer_topics(*fixed_model, estimation.records[i].tokens, cfg.rep_infer_sweeps, derive_seed(infer_seed, i));
    empty_docs += t.empty_document;
    double norm = 0.0;
    for (double v : t.proportions) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : t.proportions) v /= norm;
    rep.push_back(std::move(t.proportions));
  }
  const auto m = stratified_match(
      column(estimation, &StructuredSample::c), labels_a(estimation), column(estimation, &StructuredSample::y),
      [&](std::size_t i, std::size_t j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < rep[i].size(); ++k) dot += rep[i][k] * rep[j][k];
        return std::max(0.0, 1.0 - dot);
      },
      cfg.matching);
  SplitEstimate e;
  e.estimate = m.estimate;
  e.diagnostics["matched_sets"] = static_cast<double>(m.sets);
  e.diagnostics["dropped_units"] = static_cast<double>(m.dropped);
  e.diagnostics["empty_documents"] = static_cast<double>(empty_docs);
  return e;
}

IpwResult ipw_from_scores(std::span<const int> a, std::span<const int> y, std::span<const double> scores,
                          double lower, double upper, std::size_t bootstrap, Seed seed) {
  const std::size_t n = a.size();
  if (y.size() != n || scores.size() != n) throw std::invalid_argument("ipw inputs differ in length");
  if (!(0.0 < lower && lower <= upper && upper < 1.0)) throw std::invalid_argument("ipw truncation bounds must satisfy 0 < lower <= upper < 1");
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::clamp(scores[i], lower, upper);
  auto estimate_on = [&](auto&& index, std::size_t m) {
    double w1 = 0, wy1 = 0, w0 = 0, wy0 = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = index(k);
      if (a[i]) {
        w1 += 1.0 / e[i];
        wy1 += y[i] / e[i];
      } else {
        w0 += 1.0 / (1.0 - e[i]);
        wy0 += y[i] / (1.0 - e[i]);
      }
    }
    if (w1 == 0.0 || w0 == 0.0) throw EstimationError("ipw sample lacks a treatment arm");
    return wy1 / w1 - wy0 / w0;
  };
  IpwResult r;
  r.point = estimate_on([](std::size_t k) { return k; }, n);
  if (bootstrap == 0) {
    r.estimate = r.point;
    return r;
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t b = 0; b < bootstrap; ++b) {
    Rng rng(derive_seed(seed, "bootstrap", b));
    for (auto& i : idx) i = rng.below(n);
    r.replicates.push_back(estimate_on([&](std::size_t k) { return idx[k]; }, n));
  }
  r.estimate = std::accumulate(r.replicates.begin(), r.replicates.end(), 0.0) / static_cast<double>(bootstrap);
  return r;
}

SplitEstimate ipw_split(const Dataset& train, const Dataset& estimation, const EstimatorConfig& cfg, Seed seed) {
  const Propensity p = fit_propensity(train, estimation, cfg);
  const auto r = ipw_from_scores(labels_a(estimation), column(estimation, &StructuredSample::y), p.scores,
                                 cfg.ipw_lower, cfg.ipw_upper, cfg.bootstrap, seed);
  SplitEstimate e;
  e.estimate = r.estimate;
  e.accuracy = p.accuracy;
  e.bootstrap = r.replicates;
  std::size_t truncated = 0;
  for (double s : p.scores) truncated += s < cfg.ipw_lower || s > cfg.ipw_upper;
  e.diagnostics["truncated_scores"] = static_cast<double>(truncated);
  e.diagnostics["point_estimate"] = r.point;
  return e;
}

JointTable corrupt_joint(const JointTable& joint, double fpr, double fnr) {
  JointTable out;
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < 2; ++y) {
        const double p0 = joint.at(0, c, a, y), p1 = joint.at(1, c, a, y);
        out.at(0, c, a, y) = (1.0 - fpr) * p0 + fnr * p1;
        out.at(1, c, a, y) = fpr * p0 + (1.0 - fnr) * p1;
      }
  return out;
}

CorrectedJoint correct_joint(const JointTable& observed, double fpr, double fnr, double min_determinant) {
  const double det = 1.0 - fpr - fnr;
  if (std::abs(det) < min_determinant) {
    throw EstimationError("misclassification matrix is near singular: |1 - fpr - fnr| = " + std::to_string(std::abs(det)) +
                          " (fpr " + std::to_string(fpr) + ", fnr " + std::to_string(fnr) + ")");
  }
  CorrectedJoint out;
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a)
      for (int y = 0; y < 2; ++y) {
        const double q0 = observed.at(0, c, a, y), q1 = observed.at(1, c, a, y);
        double p0 = ((1.0 - fnr) * q0 - fnr * q1) / det;
        double p1 = ((1.0 - fpr) * q1 - fpr * q0) / det;
        if (p0 < 0.0 || p1 < 0.0) {
          ++out.clamped_cells;
          p0 = std::max(p0, 0.0);
          p1 = std::max(p1, 0.0);
          const double total = q0 + q1;
          const double s = p0 + p1;
          if (s > 0.0) {
            p0 *= total / s;
            p1 *= total / s;
          }
        }
        out.joint.at(0, c, a, y) = p0;
        out.joint.at(1, c, a, y) = p1;
      }
  return out;
}

SplitEstimate measurement_error_split(const Dataset& labeled, const Dataset& estimation, const EstimatorConfig& cfg) {
  const std::size_t half = labeled.size() / 2;
  std::vector<std::size_t> fit_idx(half), rate_idx(labeled.size() - half);
  std::iota(fit_idx.begin(), fit_idx.end(), 0);
  std::iota(rate_idx.begin(), rate_idx.end(), half);
  const Dataset fit = labeled.subset(fit_idx);
  const Dataset rates = labeled.subset(rate_idx);

  LogisticModel model;
  ErrorRates er;
  try {
    model = train_logreg(text_features(fit, false, cfg.features), labels_u(fit), cfg.hyper, cfg.seed);
    er = estimate_error_rates(model, text_features(rates, false, cfg.features), labels_u(rates));
  } catch (const std::invalid_argument& e) {
    throw EstimationError(std::string("measurement classifier: ") + e.what());
  }

  const auto xe = text_features(estimation, false, cfg.features);
  std::vector<StructuredSample> imputed;
  imputed.reserve(estimation.size());
  for (std::size_t i = 0; i < estimation.size(); ++i) {
    StructuredSample s = estimation.records[i].structured();
    s.u = model.predict(xe[i]);
    imputed.push_back(s);
  }
  const auto corrected = correct_joint(JointTable::from_samples(imputed), er.fpr, er.fnr, cfg.me_min_determinant);
  SplitEstimate e;
  std::size_t fallbacks = 0;
  try {
    e.estimate = plug_in_ate_with_fallback(corrected.joint, &fallbacks);
  } catch (const std::exception& ex) {
    throw EstimationError(std::string("measurement plug-in: ") + ex.what());
  }
  e.accuracy = accuracy(model, xe, labels_u(estimation));
  e.diagnostics["fpr"] = er.fpr;
  e.diagnostics["fnr"] = er.fnr;
  e.diagnostics["clamped_cells"] = static_cast<double>(corrected.clamped_cells);
  e.diagnostics["stratum_fallbacks"] = static_cast<double>(fallbacks);
  e.diagnostics["labeled"] = static_cast<double>(labeled.size());
  return e;
}

EstimateReport propensity_match_ate(const Dataset& dataset, const EstimatorConfig& cfg) {
  return crossfit(
      dataset, [&](const Dataset& tr, const Dataset& es, Seed) { return propensity_match_split(tr, es, cfg); },
      "propensity", cfg.seed);
}

EstimateReport representation_match_ate(const Dataset& dataset, const EstimatorConfig& cfg) {
  return crossfit(
      dataset,
      [&](const Dataset& tr, const Dataset& es, Seed s) { return representation_match_split(tr, es, cfg, nullptr, s); },
      "representation", cfg.seed);
}

EstimateReport representation_match_ate(const Dataset& dataset, const LdaModel& lda, const EstimatorConfig& cfg) {
  if (!(lda.vocab == dataset.meta.vocab)) throw std::invalid_argument("LDA vocabulary differs from the dataset's");
  return crossfit(
      dataset,
      [&](const Dataset& tr, const Dataset& es, Seed s) { return representation_match_split(tr, es, cfg, &lda, s); },
      "representation", cfg.seed);
}

EstimateReport ipw_ate(const Dataset& dataset, const EstimatorConfig& cfg) {
  return crossfit(
      dataset, [&](const Dataset& tr, const Dataset& es, Seed s) { return ipw_split(tr, es, cfg, s); }, "ipw",
      cfg.seed);
}

EstimateReport measurement_error_ate(const Dataset& dataset, std::optional<std::size_t> labeled_budget,
                                     const EstimatorConfig& cfg) {
  const std::size_t n = dataset.size();
  if (!labeled_budget || *labeled_budget == n / 2) {
    return crossfit(
        dataset, [&](const Dataset& lab, const Dataset& es, Seed) { return measurement_error_split(lab, es, cfg); },
        "measurement", cfg.seed);
  }
  const std::size_t b = *labeled_budget;
  if (b < 4 || b > n / 2) throw std::invalid_argument("labeled budget must lie in [4, n/2]");
  auto [first, second] = crossfit_halves(n, cfg.seed);
  std::vector<std::size_t> perm = std::move(first);
  perm.insert(perm.end(), second.begin(), second.end());
  auto part = [&](std::size_t from, std::size_t to) {
    return dataset.subset(std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(from),
                                                   perm.begin() + static_cast<std::ptrdiff_t>(to)));
  };
  const SplitEstimate e1 = measurement_error_split(part(0, b), part(b, n), cfg);
  const SplitEstimate e2 = measurement_error_split(part(n - b, n), part(0, n - b), cfg);
  return finish(dataset, "measurement", average(e1, e2), cfg.seed);
}

double plug_in_ate_with_fallback(const JointTable& joint, std::size_t* fallbacks) {
  double total = 0.0, ate = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int u = 0; u < 2; ++u) {
      double mass[2], y1[2];
      for (int a = 0; a < 2; ++a) {
        y1[a] = joint.at(u, c, a, 1);
        mass[a] = joint.at(u, c, a, 0) + y1[a];
      }
      const double w = mass[0] + mass[1];
      if (w <= 0.0) continue;
      total += w;
      double mean[2];
      for (int a = 0; a < 2; ++a) {
        if (mass[a] > 0.0) {
          mean[a] = y1[a] / mass[a];
          continue;
        }
        const double pooled_y1 = joint.at(0, c, a, 1) + joint.at(1, c, a, 1);
        const double pooled = pooled_y1 + joint.at(0, c, a, 0) + joint.at(1, c, a, 0);
        if (pooled <= 0.0) throw StratumError(a, c, -1);
        mean[a] = pooled_y1 / pooled;
        if (fallbacks) ++*fallbacks;
      }
      ate += w * (mean[1] - mean[0]);
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("plug_in_ate: empty joint");
  return ate / total;
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("percentile interval of an empty sample");
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double tail = 0.5 * (1.0 - level);
  return {q(tail), q(1.0 - tail)};
}

BaselineResults baseline_suite(const Dataset& dataset, std::optional<std::size_t> labeled_budget,
                               const EstimatorConfig& cfg) {
  BaselineResults out;
  const auto samples = dataset.structured();
  const JointTable joint = JointTable::from_samples(samples);
  auto attempt = [&](const std::string& method, const std::function<double()>& fn) {
    try {
      EstimateReport r = make_report(dataset, method, fn());
      r.seed = cfg.seed;
      out.reports.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.failures.emplace_back(method, e.what());
    }
  };
  attempt("oracle", [&] { return oracle_ate(dataset.meta.structured); });
  attempt("naive", [&] { return c_adjusted_ate(joint); });
  attempt("unadjusted", [&] { return unadjusted_ate(joint); });
  if (labeled_budget) {
    attempt("plugin_labeled", [&] {
      const std::size_t n = dataset.size();
      const std::size_t b = *labeled_budget;
      if (b == 0 || b > n) throw std::invalid_argument("labeled budget outside [1, n]");
      auto [first, second] = crossfit_halves(n, cfg.seed);
      first.insert(first.end(), second.begin(), second.end());
      std::vector<StructuredSample> lab;
      for (std::size_t k = 0; k < b; ++k) lab.push_back(samples[first[k]]);
      std::size_t fallbacks = 0;
      return plug_in_ate_with_fallback(JointTable::from_samples(lab), &fallbacks);
    });
  }
  return out;
}

EstimateReport estimate_by_name(const Dataset& dataset, const std::string& method,
                                std::optional<std::size_t> labeled_budget, const EstimatorConfig& cfg,
                                const LdaModel* lda) {
  if (method == "representation") {
    return lda ? representation_match_ate(dataset, *lda, cfg) : representation_match_ate(dataset, cfg);
  }
  if (method == "propensity") return propensity_match_ate(dataset, cfg);
  if (method == "ipw") return ipw_ate(dataset, cfg);
  if (method == "measurement") return measurement_error_ate(dataset, labeled_budget, cfg);
  if (method != "oracle" && method != "naive" && method != "unadjusted" && method != "plugin_labeled") {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  if (method == "plugin_labeled" && !labeled_budget) labeled_budget = dataset.size() / 2;
  const auto base = baseline_suite(dataset, labeled_budget, cfg);
  for (const auto& r : base.reports) {
    if (r.method == method) return r;
  }
  for (const auto& [m, msg] : base.failures) {
    if (m == method) throw EstimationError(msg);
  }
  throw EstimationError(method + " produced no estimate");
}

}  // namespace textcausal
