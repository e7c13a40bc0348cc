#include "textcausal/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "textcausal/io.hpp"

namespace textcausal {

std::vector<double> BowFeatures::dense() const {
  std::vector<double> out(dim(), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) out[indices[i]] = values[i];
  for (std::size_t j = 0; j < covariates.size(); ++j) out[vocab_size + j] = covariates[j];
  return out;
}

BowFeatures featurize(const TokenSequence& tokens, std::size_t vocab_size, std::span<const int> covariates,
                      FeatureMode mode) {
  BowFeatures f;
  f.vocab_size = vocab_size;
  std::vector<std::uint32_t> ids(tokens.ids.begin(), tokens.ids.end());
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size();) {
    if (ids[i] >= vocab_size) throw std::out_of_range("token id " + std::to_string(ids[i]) + " outside vocab");
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    f.indices.push_back(ids[i]);
    f.values.push_back(mode == FeatureMode::kCounts ? static_cast<double>(j - i) : 1.0);
    i = j;
  }
  for (int c : covariates) f.covariates.push_back(static_cast<double>(c));
  return f;
}

BowFeatures featurize(const TokenSequence& tokens, const Vocab& vocab, std::span<const int> covariates,
                      FeatureMode mode) {
  return featurize(tokens, vocab.size(), covariates, mode);
}

double LogisticModel::logit(const BowFeatures& x) const {
  double z = intercept;
  for (std::size_t i = 0; i < x.indices.size(); ++i) z += weights[x.indices[i]] * x.values[i];
  for (std::size_t j = 0; j < x.covariates.size(); ++j) z += weights[x.vocab_size + j] * x.covariates[j];
  return z;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_inputs(std::span<const BowFeatures> x, std::span<const int> y, std::size_t dim) {
  if (x.size() != y.size()) throw std::invalid_argument("features and labels differ in length");
  for (const auto& f : x) {
    if (f.dim() != dim) throw std::invalid_argument("inconsistent feature dimension");
  }
}

}  // namespace

double LogisticModel::predict_proba(const BowFeatures& x) const {
  const double p = sigmoid(logit(x));
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

int LogisticModel::predict(const BowFeatures& x) const { return predict_proba(x) > 0.5 ? 1 : 0; }

double logreg_objective(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y) {
  check_inputs(x, y, model.weights.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = model.logit(x[i]);
    loss += y[i] ? softplus(-z) : softplus(z);
  }
  loss /= static_cast<double>(x.size());
  double norm2 = 0.0;
  for (double w : model.weights) norm2 += w * w;
  return loss + 0.5 * model.l2 * norm2;
}

std::vector<double> logreg_gradient(const LogisticModel& model, std::span<const BowFeatures> x,
                                    std::span<const int> y) {
  check_inputs(x, y, model.weights.size());
  const std::size_t d = model.weights.size();
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = sigmoid(model.logit(x[i])) - y[i];
    const auto& f = x[i];
    for (std::size_t k = 0; k < f.indices.size(); ++k) g[f.indices[k]] += r * f.values[k];
    for (std::size_t j = 0; j < f.covariates.size(); ++j) g[f.vocab_size + j] += r * f.covariates[j];
    g[d] += r;
  }
  const double inv = 1.0 / static_cast<double>(x.size());
  for (std::size_t k = 0; k < d; ++k) g[k] = g[k] * inv + model.l2 * model.weights[k];
  g[d] *= inv;
  return g;
}

LogisticModel train_logreg(std::span<const BowFeatures> x, std::span<const int> y, const LogRegHyper& hyper,
                           Seed seed) {
  if (x.size() < 2) throw std::invalid_argument("logistic regression needs at least two examples");
  const std::size_t d = x.front().dim();
  check_inputs(x, y, d);
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("labels must be 0 or 1");
    (v ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw std::invalid_argument("labels contain a single class");

  LogisticModel m;
  m.weights.assign(d, 0.0);
  m.l2 = hyper.l2.value_or(1.0 / static_cast<double>(x.size()));
  m.learning_rate = hyper.learning_rate;
  m.max_epochs = hyper.max_epochs;
  m.seed = seed;

  double rate = hyper.learning_rate;
  double loss = logreg_objective(m, x, y);
  m.loss_history.push_back(loss);
  LogisticModel trial = m;
  for (m.epochs = 0; m.epochs < hyper.max_epochs; ++m.epochs) {
    const auto g = logreg_gradient(m, x, y);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    m.final_grad_norm = std::sqrt(gn);
    if (m.final_grad_norm <= hyper.grad_tol) {
      m.converged = true;
      break;
    }
    for (std::size_t k = 0; k < d; ++k) trial.weights[k] = m.weights[k] - rate * g[k];
    trial.intercept = m.intercept - rate * g[d];
    const double next = logreg_objective(trial, x, y);
    if (next > loss || !std::isfinite(next)) {
      rate *= 0.5;
      continue;
    }
    m.weights.swap(trial.weights);
    trial.weights = m.weights;
    m.intercept = trial.intercept;
    loss = next;
    m.loss_history.push_back(loss);
  }
  if (!m.converged) {
    const auto g = logreg_gradient(m, x, y);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    m.final_grad_norm = std::sqrt(gn);
    m.converged = m.final_grad_norm <= hyper.grad_tol;
  }
  return m;
}

double accuracy(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y) {
  if (x.empty()) throw std::invalid_argument("accuracy of an empty evaluation set");
  if (x.size() != y.size()) throw std::invalid_argument("features and labels differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) hits += model.predict(x[i]) == y[i];
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

ErrorRates error_rates_from_predictions(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label counts differ");
  ErrorRates r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++r.positives;
      r.false_negatives += predicted[i] == 0;
    } else {
      ++r.negatives;
      r.false_positives += predicted[i] == 1;
    }
  }
  if (r.positives == 0 || r.negatives == 0) {
    throw std::invalid_argument("error rates need both classes in the held-out labels");
  }
  r.fpr = static_cast<double>(r.false_positives) / static_cast<double>(r.negatives);
  r.fnr = static_cast<double>(r.false_negatives) / static_cast<double>(r.positives);
  return r;
}

ErrorRates estimate_error_rates(const LogisticModel& model, std::span<const BowFeatures> x, std::span<const int> y) {
  std::vector<int> pred;
  pred.reserve(x.size());
  for (const auto& f : x) pred.push_back(model.predict(f));
  return error_rates_from_predictions(pred, y);
}

std::string LogisticModel::serialize() const {
  KeyValueRecord rec;
  rec.set("format", std::string("textcausal.logreg.v1"));
  rec.set("l2", l2);
  rec.set("learning_rate", learning_rate);
  rec.set_int("max_epochs", static_cast<long long>(max_epochs));
  rec.set("seed", std::to_string(seed));
  rec.set_int("epochs", static_cast<long long>(epochs));
  rec.set_int("converged", converged ? 1 : 0);
  rec.set("final_grad_norm", final_grad_norm);
  rec.set("intercept", intercept);
  std::string w;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (i) w += ' ';
    w += format_double(weights[i]);
  }
  rec.set_int("dim", static_cast<long long>(weights.size()));
  rec.set("weights", w);
  return rec.to_string();
}

LogisticModel LogisticModel::deserialize(std::string_view text) {
  const auto rec = KeyValueRecord::parse(text);
  if (rec.get("format") != "textcausal.logreg.v1") throw std::runtime_error("not a logistic model record");
  LogisticModel m;
  m.l2 = rec.get_double("l2");
  m.learning_rate = rec.get_double("learning_rate");
  m.max_epochs = static_cast<std::size_t>(rec.get_int("max_epochs"));
  m.seed = std::stoull(rec.get("seed"));
  m.epochs = static_cast<std::size_t>(rec.get_int("epochs"));
  m.converged = rec.get_int("converged") != 0;
  m.final_grad_norm = rec.get_double("final_grad_norm");
  m.intercept = rec.get_double("intercept");
  const auto dim = static_cast<std::size_t>(rec.get_int("dim"));
  const std::string& w = rec.get("weights");
  for (const auto& piece : split(w, ' ')) {
    if (!piece.empty()) m.weights.push_back(parse_double(piece));
  }
  if (m.weights.size() != dim) throw std::runtime_error("weight count does not match dim");
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite weight");
  }
  return m;
}

SplitSpec make_split(std::size_t n, Seed seed, double train_fraction, double dev_fraction) {
  if (train_fraction < 0 || dev_fraction < 0 || train_fraction + dev_fraction > 1) {
    throw std::invalid_argument("split fractions must be nonnegative and sum to at most one");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(perm);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n))));
  SplitSpec s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), perm.end());
  return s;
}

}  // namespace textcausal
