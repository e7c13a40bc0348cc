#include "textcausal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "textcausal/bridge.hpp"
#include "textcausal/corpus.hpp"
#include "textcausal/io.hpp"
#include "textcausal/parallel.hpp"

namespace textcausal {

using ojson = nlohmann::ordered_json;

namespace {

const std::set<std::string>& known_methods() {
  static const std::set<std::string> m{"representation", "propensity", "ipw", "measurement",
                                       "oracle",         "naive",      "unadjusted"};
  return m;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

template <typename T, typename F>
std::string join_map(const std::vector<T>& v, F f) {
  std::vector<std::string> parts;
  for (const auto& x : v) parts.push_back(f(x));
  return join(parts, ",");
}

std::vector<std::string> list_items(const std::string& value) {
  std::vector<std::string> out;
  for (const auto& piece : split(value, ',')) {
    const auto t = trim(piece);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::size_t parse_count(const std::string& value) {
  const long long v = parse_int(value);
  if (v < 0) throw std::invalid_argument("expected a nonnegative integer, got '" + value + "'");
  return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& value) {
  std::size_t pos = 0;
  const auto v = std::stoull(value, &pos);
  if (pos != value.size() || value.front() == '-') throw std::invalid_argument("expected an unsigned integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + value + "'");
}

EffectCell parse_cell(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2 && parts.size() != 4) {
    throw std::invalid_argument("cell '" + text + "' must be tau_word:delta_word[:tau_second:delta_second]");
  }
  EffectCell c;
  c.word = {parse_double(trim(parts[0])), parse_double(trim(parts[1]))};
  if (parts.size() == 4) c.second = EffectParams{parse_double(trim(parts[2])), parse_double(trim(parts[3]))};
  return c;
}

std::string cell_text(const EffectCell& c) {
  std::string s = format_double(c.word.tau) + ":" + format_double(c.word.delta);
  if (c.second) s += ":" + format_double(c.second->tau) + ":" + format_double(c.second->delta);
  return s;
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt_double(std::string_view s) {
  if (trim(s).empty()) return std::nullopt;
  return parse_double(trim(s));
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string EffectCell::label() const {
  std::string s = "tau_word=" + format_double(word.tau) + " delta_word=" + format_double(word.delta);
  if (second) s += " tau_second=" + format_double(second->tau) + " delta_second=" + format_double(second->delta);
  return s;
}

std::size_t ExperimentConfig::effective_length() const {
  if (length) return length;
  return dgp == DgpKind::kTrivial ? 16 : 32;
}

void ExperimentConfig::validate() const {
  if (cells.empty()) throw std::invalid_argument("config: cells must not be empty");
  if (structured_seeds.empty() || text_seeds.empty()) throw std::invalid_argument("config: seed lists must not be empty");
  if (n < 100) throw std::invalid_argument("config: n must be at least 100");
  for (const auto& c : cells) {
    c.word.validate();
    if (c.second) c.second->validate();
    if ((dgp == DgpKind::kTrivial) == c.second.has_value()) {
      throw std::invalid_argument(std::string("config: cells for the ") + to_string(dgp) +
                                  " dgp need " + (dgp == DgpKind::kTrivial ? "2" : "4") + " parameters");
    }
  }
  for (const auto& m : methods) {
    if (!known_methods().count(m)) throw std::invalid_argument("config: unknown method '" + m + "'");
  }
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 4 || budgets[i] > n / 2) throw std::invalid_argument("config: budgets must lie in [4, n/2]");
    if (i && budgets[i] <= budgets[i - 1]) throw std::invalid_argument("config: budgets must be ascending");
  }
  if (vocab_size < 2) throw std::invalid_argument("config: vocab_size must be at least 2");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  const auto& e = estimator;
  return {
      {"name", name},
      {"dgp", to_string(dgp)},
      {"cells", join_map(cells, cell_text)},
      {"structured_seeds", join_map(structured_seeds, [](auto v) { return std::to_string(v); })},
      {"text_seeds", join_map(text_seeds, [](auto v) { return std::to_string(v); })},
      {"n", std::to_string(n)},
      {"methods", join(methods, ",")},
      {"classification", classification ? "true" : "false"},
      {"budgets", join_map(budgets, [](auto v) { return std::to_string(v); })},
      {"effect_form", to_string(form)},
      {"length", std::to_string(length)},
      {"vocab_size", std::to_string(vocab_size)},
      {"lda.topics", std::to_string(lda_topics)},
      {"lda.alpha", format_double(lda_alpha)},
      {"lda.beta", format_double(lda_beta)},
      {"lda.iterations", std::to_string(lda_iterations)},
      {"lda.documents", std::to_string(lda_documents)},
      {"lda.model", lda_model},
      {"lm.order", std::to_string(lm_order)},
      {"lm.smoothing", format_double(lm_smoothing)},
      {"lm.sentences", std::to_string(lm_sentences)},
      {"lm.bridge", lm_bridge},
      {"classifier.l2", e.hyper.l2 ? format_double(*e.hyper.l2) : "auto"},
      {"classifier.learning_rate", format_double(e.hyper.learning_rate)},
      {"classifier.max_epochs", std::to_string(e.hyper.max_epochs)},
      {"classifier.grad_tol", format_double(e.hyper.grad_tol)},
      {"classifier.features", e.features == FeatureMode::kCounts ? "counts" : "presence"},
      {"matching.max_candidates", std::to_string(e.matching.max_candidates)},
      {"matching.exact_limit", std::to_string(e.matching.exact_limit)},
      {"ipw.lower", format_double(e.ipw_lower)},
      {"ipw.upper", format_double(e.ipw_upper)},
      {"ipw.bootstrap", std::to_string(e.bootstrap)},
      {"rep.topics", std::to_string(e.rep_topics)},
      {"rep.train_docs", std::to_string(e.rep_train_docs)},
      {"rep.iterations", std::to_string(e.rep_iterations)},
      {"rep.infer_sweeps", std::to_string(e.rep_infer_sweeps)},
      {"me.min_determinant", format_double(e.me_min_determinant)},
      {"output", output.string()},
      {"master_seed", std::to_string(master_seed)},
      {"workers", std::to_string(workers)},
  };
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : ExperimentConfig{}.entries()) keys.push_back(k);
  return keys;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::experiment_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) {
    if (k != "output" && k != "workers") out += k + " = " + v + "\n";
  }
  return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto& e = cfg.estimator;
  try {
    if (key == "name") cfg.name = value;
    else if (key == "dgp") cfg.dgp = dgp_from_string(value);
    else if (key == "cells") {
      cfg.cells.clear();
      for (const auto& item : list_items(value)) cfg.cells.push_back(parse_cell(item));
    } else if (key == "structured_seeds") {
      cfg.structured_seeds.clear();
      for (const auto& item : list_items(value)) cfg.structured_seeds.push_back(parse_u64(item));
    } else if (key == "text_seeds") {
      cfg.text_seeds.clear();
      for (const auto& item : list_items(value)) cfg.text_seeds.push_back(parse_u64(item));
    } else if (key == "n") cfg.n = parse_count(value);
    else if (key == "methods") cfg.methods = list_items(value);
    else if (key == "classification") cfg.classification = parse_bool(value);
    else if (key == "budgets") {
      cfg.budgets.clear();
      for (const auto& item : list_items(value)) cfg.budgets.push_back(parse_count(item));
    } else if (key == "effect_form") cfg.form = effect_form_from_string(value);
    else if (key == "length") cfg.length = parse_count(value);
    else if (key == "vocab_size") cfg.vocab_size = parse_count(value);
    else if (key == "lda.topics") cfg.lda_topics = parse_count(value);
    else if (key == "lda.alpha") cfg.lda_alpha = parse_double(value);
    else if (key == "lda.beta") cfg.lda_beta = parse_double(value);
    else if (key == "lda.iterations") cfg.lda_iterations = parse_count(value);
    else if (key == "lda.documents") cfg.lda_documents = parse_count(value);
    else if (key == "lda.model") cfg.lda_model = value;
    else if (key == "lm.order") cfg.lm_order = parse_count(value);
    else if (key == "lm.smoothing") cfg.lm_smoothing = parse_double(value);
    else if (key == "lm.sentences") cfg.lm_sentences = parse_count(value);
    else if (key == "lm.bridge") cfg.lm_bridge = value;
    else if (key == "classifier.l2") {
      if (value == "auto") e.hyper.l2.reset();
      else e.hyper.l2 = parse_double(value);
    } else if (key == "classifier.learning_rate") e.hyper.learning_rate = parse_double(value);
    else if (key == "classifier.max_epochs") e.hyper.max_epochs = parse_count(value);
    else if (key == "classifier.grad_tol") e.hyper.grad_tol = parse_double(value);
    else if (key == "classifier.features") {
      if (value == "counts") e.features = FeatureMode::kCounts;
      else if (value == "presence") e.features = FeatureMode::kPresence;
      else throw std::invalid_argument("expected counts or presence");
    } else if (key == "matching.max_candidates") e.matching.max_candidates = parse_count(value);
    else if (key == "matching.exact_limit") e.matching.exact_limit = parse_count(value);
    else if (key == "ipw.lower") e.ipw_lower = parse_double(value);
    else if (key == "ipw.upper") e.ipw_upper = parse_double(value);
    else if (key == "ipw.bootstrap") e.bootstrap = parse_count(value);
    else if (key == "rep.topics") e.rep_topics = parse_count(value);
    else if (key == "rep.train_docs") e.rep_train_docs = parse_count(value);
    else if (key == "rep.iterations") e.rep_iterations = parse_count(value);
    else if (key == "rep.infer_sweeps") e.rep_infer_sweeps = parse_count(value);
    else if (key == "me.min_determinant") e.me_min_determinant = parse_double(value);
    else if (key == "output") cfg.output = value;
    else if (key == "master_seed") cfg.master_seed = parse_u64(value);
    else if (key == "workers") cfg.workers = parse_count(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  } catch (const std::invalid_argument& ex) {
    const std::string msg = ex.what();
    if (msg.rfind("unknown config key", 0) == 0) throw;
    throw std::invalid_argument("config key '" + key + "': " + msg);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("config key '" + key + "': value out of range");
  } catch (const std::runtime_error& ex) {
    throw std::invalid_argument("config key '" + key + "': " + ex.what());
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
  apply_setting(cfg, std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  const auto lines = split(text, '\n');
  // '#' starts a comment anywhere on a line.
  auto content = [&](std::size_t i) {
    std::string_view l = lines[i];
    return std::string(trim(l.substr(0, l.find('#'))));
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string line = content(i);
    if (line.empty()) continue;
    // A value ending in ',' continues on the next line.
    while (line.back() == ',' && i + 1 < lines.size()) line += " " + content(++i);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(cfg, std::string(trim(std::string_view(line).substr(0, eq))),
                    std::string(trim(std::string_view(line).substr(eq + 1))));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

// ---------------------------------------------------------------------------

namespace {

SeedHasher cell_hasher(const ExperimentConfig& cfg, std::size_t cell, std::size_t si, std::size_t ti) {
  SeedHasher h(cfg.master_seed);
  h.add(std::string_view("run"));
  h.add(cfg.structured_seeds.at(si)).add(cfg.text_seeds.at(ti));
  const auto& c = cfg.cells.at(cell);
  h.add(c.word.tau).add(c.word.delta);
  if (c.second) h.add(c.second->tau).add(c.second->delta);
  return h;
}

}  // namespace

Seed dataset_seed(const ExperimentConfig& cfg, std::size_t cell, std::size_t si, std::size_t ti) {
  return cell_hasher(cfg, cell, si, ti).add(std::string_view("dataset")).finish();
}

Seed run_seed(const ExperimentConfig& cfg, std::size_t cell, std::size_t si, std::size_t ti, const std::string& method) {
  return cell_hasher(cfg, cell, si, ti).add(std::string_view("method")).add(method).finish();
}

StructuredParams structured_for(const ExperimentConfig& cfg, std::size_t si) {
  return sample_structured_params(derive_seed(cfg.master_seed, "structured", cfg.structured_seeds.at(si)));
}

struct GeneratorFactory::Shared {
  std::mutex mutex;
  std::shared_ptr<const LdaModel> lda;
  std::shared_ptr<const SequentialLm> lm;
  std::string lm_source;
  std::map<std::size_t, StructuredParams> structured;
};

GeneratorFactory::GeneratorFactory(const ExperimentConfig& cfg) : cfg_(cfg), shared_(std::make_unique<Shared>()) {}
GeneratorFactory::~GeneratorFactory() = default;

std::unique_ptr<TextGenerator> GeneratorFactory::make(std::size_t cell, std::size_t ti) {
  const auto& c = cfg_.cells.at(cell);
  TextEffectConfig tc;
  tc.word = c.word;
  tc.second = c.second;
  tc.form = cfg_.form;
  tc.ordering_seed = derive_seed(cfg_.master_seed, "text", cfg_.text_seeds.at(ti));
  switch (cfg_.dgp) {
    case DgpKind::kTrivial:
      return std::make_unique<TrivialGenerator>(Vocab::numbered(cfg_.vocab_size), tc, cfg_.effective_length());
    case DgpKind::kLda: {
      std::shared_ptr<const LdaModel> model;
      {
        std::lock_guard lock(shared_->mutex);
        if (!shared_->lda) {
          if (!cfg_.lda_model.empty()) {
            shared_->lda = std::make_shared<LdaModel>(LdaModel::deserialize(read_file(cfg_.lda_model)));
          } else {
            SeedHasher h(cfg_.master_seed);
            h.add(std::string_view("lda")).add(static_cast<std::uint64_t>(cfg_.lda_topics)).add(cfg_.lda_alpha);
            h.add(cfg_.lda_beta).add(static_cast<std::uint64_t>(cfg_.lda_iterations));
            h.add(static_cast<std::uint64_t>(cfg_.lda_documents));
            const auto cache = cfg_.output / ("lda-" + hex(h.finish()) + ".txt");
            if (std::filesystem::exists(cache)) {
              shared_->lda = std::make_shared<LdaModel>(LdaModel::deserialize(read_file(cache)));
            } else {
              const Corpus corpus = topical_corpus(cfg_.lda_documents, 0);
              LdaOptions opt;
              opt.n_topics = cfg_.lda_topics;
              opt.alpha = cfg_.lda_alpha;
              opt.beta = cfg_.lda_beta;
              opt.iterations = cfg_.lda_iterations;
              opt.seed = derive_seed(cfg_.master_seed, "lda");
              opt.corpus_id = corpus.id;
              auto trained = std::make_shared<LdaModel>(train_lda(corpus.documents, corpus.vocab, opt));
              std::filesystem::create_directories(cfg_.output);
              write_file_atomic(cache, trained->serialize());
              shared_->lda = trained;
            }
          }
        }
        model = shared_->lda;
      }
      return std::make_unique<LdaGenerator>(model, tc, cfg_.effective_length());
    }
    case DgpKind::kSequential: {
      std::shared_ptr<const SequentialLm> lm;
      std::string source;
      {
        std::lock_guard lock(shared_->mutex);
        if (!shared_->lm) {
          if (!cfg_.lm_bridge.empty()) {
            std::vector<std::string> argv;
            std::istringstream is(cfg_.lm_bridge);
            for (std::string w; is >> w;) argv.push_back(w);
            shared_->lm = std::make_shared<BridgeLm>(argv);
            shared_->lm_source = "bridge:" + cfg_.lm_bridge;
          } else {
            const Corpus corpus = sentence_corpus(cfg_.lm_sentences, 0);
            shared_->lm = std::shared_ptr<const SequentialLm>(build_ngram_lm(
                corpus.documents, corpus.vocab, cfg_.lm_order, cfg_.lm_smoothing, corpus.vocab.id(kEndOfSentence)));
            shared_->lm_source = corpus.id + "/ngram" + std::to_string(cfg_.lm_order);
          }
        }
        lm = shared_->lm;
        source = shared_->lm_source;
      }
      return std::make_unique<SequentialGenerator>(lm, sentence_templates(), tc, cfg_.effective_length(), source);
    }
  }
  throw std::logic_error("unreachable dgp");
}

Dataset make_dataset(GeneratorFactory& factory, std::size_t cell, std::size_t si, std::size_t ti) {
  const auto& cfg = factory.config();
  const auto gen = factory.make(cell, ti);
  return generate_dataset(structured_for(cfg, si), *gen, cfg.n, dataset_seed(cfg, cell, si, ti));
}

// ---------------------------------------------------------------------------

std::string serialize_run_record(const RunRecord& rec) {
  const auto& r = rec.report;
  ojson j;
  j["cell"] = rec.cell;
  j["structured_index"] = rec.structured_index;
  j["text_index"] = rec.text_index;
  j["method"] = rec.method;
  j["budget"] = rec.budget ? ojson(*rec.budget) : ojson(nullptr);
  j["ok"] = rec.ok;
  j["error"] = rec.error;
  j["accuracy"] = rec.accuracy ? ojson(*rec.accuracy) : ojson(nullptr);
  ojson rj;
  rj["method"] = r.method;
  rj["dgp"] = r.dgp;
  rj["structured_seed"] = r.structured_seed;
  rj["text_seed"] = r.text_seed;
  rj["tau_word"] = r.tau_word;
  rj["delta_word"] = r.delta_word;
  rj["tau_second"] = r.tau_second ? ojson(*r.tau_second) : ojson(nullptr);
  rj["delta_second"] = r.delta_second ? ojson(*r.delta_second) : ojson(nullptr);
  rj["n"] = r.n;
  rj["estimate"] = r.estimate;
  rj["oracle"] = r.oracle;
  rj["abs_error"] = r.abs_error;
  rj["ci_low"] = r.ci_low ? ojson(*r.ci_low) : ojson(nullptr);
  rj["ci_high"] = r.ci_high ? ojson(*r.ci_high) : ojson(nullptr);
  rj["classifier_accuracy"] = r.classifier_accuracy ? ojson(*r.classifier_accuracy) : ojson(nullptr);
  rj["seed"] = r.seed;
  rj["fingerprint"] = r.fingerprint;
  ojson diag = ojson::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = v;
  rj["diagnostics"] = diag;
  j["report"] = rj;
  return j.dump(1) + "\n";
}

RunRecord parse_run_record(std::string_view text) {
  const ojson j = ojson::parse(text);
  auto opt = [](const ojson& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  RunRecord rec;
  rec.cell = j.at("cell").get<std::size_t>();
  rec.structured_index = j.at("structured_index").get<std::size_t>();
  rec.text_index = j.at("text_index").get<std::size_t>();
  rec.method = j.at("method").get<std::string>();
  if (!j.at("budget").is_null()) rec.budget = j.at("budget").get<std::size_t>();
  rec.ok = j.at("ok").get<bool>();
  rec.error = j.at("error").get<std::string>();
  rec.accuracy = opt(j.at("accuracy"));
  const ojson& rj = j.at("report");
  auto& r = rec.report;
  r.method = rj.at("method").get<std::string>();
  r.dgp = rj.at("dgp").get<std::string>();
  r.structured_seed = rj.at("structured_seed").get<std::uint64_t>();
  r.text_seed = rj.at("text_seed").get<std::uint64_t>();
  r.tau_word = rj.at("tau_word").get<double>();
  r.delta_word = rj.at("delta_word").get<double>();
  r.tau_second = opt(rj.at("tau_second"));
  r.delta_second = opt(rj.at("delta_second"));
  r.n = rj.at("n").get<std::size_t>();
  r.estimate = rj.at("estimate").get<double>();
  r.oracle = rj.at("oracle").get<double>();
  r.abs_error = rj.at("abs_error").get<double>();
  r.ci_low = opt(rj.at("ci_low"));
  r.ci_high = opt(rj.at("ci_high"));
  r.classifier_accuracy = opt(rj.at("classifier_accuracy"));
  r.seed = rj.at("seed").get<Seed>();
  r.fingerprint = rj.at("fingerprint").get<std::string>();
  for (const auto& [k, v] : rj.at("diagnostics").items()) r.diagnostics[k] = v.get<double>();
  return rec;
}

namespace {

struct Task {
  std::string method;
  std::optional<std::size_t> budget;
};

std::string record_digest(const ExperimentConfig& cfg, std::size_t cell, std::size_t si, std::size_t ti,
                          const Task& task) {
  SeedHasher h(cfg.master_seed);
  h.add(std::string_view("record-v1")).add(std::string_view(to_string(cfg.dgp)));
  h.add(static_cast<std::uint64_t>(cfg.n)).add(std::string_view(to_string(cfg.form)));
  h.add(static_cast<std::uint64_t>(cfg.effective_length())).add(static_cast<std::uint64_t>(cfg.vocab_size));
  if (cfg.dgp == DgpKind::kLda) {
    h.add(static_cast<std::uint64_t>(cfg.lda_topics)).add(cfg.lda_alpha).add(cfg.lda_beta);
    h.add(static_cast<std::uint64_t>(cfg.lda_iterations)).add(static_cast<std::uint64_t>(cfg.lda_documents));
    h.add(std::string_view(cfg.lda_model));
  }
  if (cfg.dgp == DgpKind::kSequential) {
    h.add(static_cast<std::uint64_t>(cfg.lm_order)).add(cfg.lm_smoothing);
    h.add(static_cast<std::uint64_t>(cfg.lm_sentences)).add(std::string_view(cfg.lm_bridge));
  }
  const Seed base = cell_hasher(cfg, cell, si, ti).finish();
  h.add(base).add(std::string_view(cfg.estimator.fingerprint())).add(std::string_view(task.method));
  h.add(task.budget ? static_cast<std::int64_t>(*task.budget) : std::int64_t{-1});
  return hex(h.finish());
}

RunRecord execute(const ExperimentConfig& cfg, const Dataset& ds, std::size_t cell, std::size_t si, std::size_t ti,
                  const Task& task) {
  RunRecord rec;
  rec.cell = cell;
  rec.structured_index = si;
  rec.text_index = ti;
  rec.method = task.method;
  rec.budget = task.budget;
  EstimatorConfig ec = cfg.estimator;
  ec.seed = run_seed(cfg, cell, si, ti, task.method);
  try {
    if (task.method == "classification") {
      const SplitSpec split = make_split(ds.size(), ec.seed);
      const auto x = text_features(ds, false, ec.features);
      std::vector<BowFeatures> xt, xe;
      std::vector<int> yt, ye;
      for (std::size_t i : split.train) xt.push_back(x[i]), yt.push_back(ds.records[i].u);
      for (std::size_t i : split.test) xe.push_back(x[i]), ye.push_back(ds.records[i].u);
      const auto model = train_logreg(xt, yt, ec.hyper, ec.seed);
      rec.accuracy = accuracy(model, xe, ye);
      rec.report = make_report(ds, task.method, 0.0);
      rec.report.classifier_accuracy = rec.accuracy;
    } else if (task.method == "representation") {
      rec.report = representation_match_ate(ds, ec);
    } else if (task.method == "propensity") {
      rec.report = propensity_match_ate(ds, ec);
    } else if (task.method == "ipw") {
      rec.report = ipw_ate(ds, ec);
    } else if (task.method == "measurement") {
      rec.report = measurement_error_ate(ds, task.budget, ec);
    } else {
      const auto base = baseline_suite(ds, task.budget, ec);
      const std::string want = task.method;
      bool found = false;
      for (const auto& r : base.reports) {
        if (r.method == want) rec.report = r, found = true;
      }
      if (!found) {
        for (const auto& [m, msg] : base.failures) {
          if (m == want) throw EstimationError(msg);
        }
        throw std::invalid_argument("unknown method '" + want + "'");
      }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.report = make_report(ds, task.method, 0.0);
    rec.report.abs_error = 0.0;
  }
  rec.report.structured_seed = cfg.structured_seeds[si];
  rec.report.text_seed = cfg.text_seeds[ti];
  rec.report.seed = ec.seed;
  rec.report.fingerprint = cfg.estimator.fingerprint();
  if (!rec.accuracy && rec.report.classifier_accuracy) rec.accuracy = rec.report.classifier_accuracy;
  return rec;
}

GridReport run_tasks(const ExperimentConfig& cfg, const std::vector<Task>& tasks, GridProgress* progress,
                     bool reuse_only) {
  cfg.validate();
  const auto run_dir = cfg.output / "runs";
  if (!reuse_only) {
    std::filesystem::create_directories(run_dir);
    write_file_atomic(cfg.output / "config.txt", cfg.experiment_text());
  }

  struct Job {
    std::size_t cell, si, ti;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c)
    for (std::size_t s = 0; s < cfg.structured_seeds.size(); ++s)
      for (std::size_t t = 0; t < cfg.text_seeds.size(); ++t) jobs.push_back({c, s, t});

  GeneratorFactory factory(cfg);
  std::vector<std::vector<RunRecord>> results(jobs.size());
  std::mutex progress_mutex;
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    std::vector<std::optional<RunRecord>> recs(tasks.size());
    std::size_t reused = 0;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const auto path = run_dir / (record_digest(cfg, job.cell, job.si, job.ti, tasks[k]) + ".json");
      if (!std::filesystem::exists(path)) continue;
      try {
        recs[k] = parse_run_record(read_file(path));
        ++reused;
      } catch (const std::exception&) {
        recs[k].reset();  // unreadable record: recompute
      }
    }
    std::size_t executed = 0;
    if (reused < tasks.size() && reuse_only) {
      throw std::runtime_error(std::to_string(tasks.size() - reused) + " run record(s) missing for cell " +
                               std::to_string(job.cell) + "; run the grid first");
    }
    if (reused < tasks.size()) {
      std::optional<Dataset> ds;
      std::string generation_error;
      try {
        ds = make_dataset(factory, job.cell, job.si, job.ti);
      } catch (const std::exception& e) {
        generation_error = std::string("dataset generation failed: ") + e.what();
      }
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (recs[k]) continue;
        if (!ds) {
          // Not persisted, so a resumed grid retries the generation.
          RunRecord failed;
          failed.cell = job.cell;
          failed.structured_index = job.si;
          failed.text_index = job.ti;
          failed.method = tasks[k].method;
          failed.budget = tasks[k].budget;
          failed.error = generation_error;
          failed.report.method = tasks[k].method;
          failed.report.dgp = to_string(cfg.dgp);
          failed.report.structured_seed = cfg.structured_seeds[job.si];
          failed.report.text_seed = cfg.text_seeds[job.ti];
          recs[k] = std::move(failed);
          continue;
        }
        recs[k] = execute(cfg, *ds, job.cell, job.si, job.ti, tasks[k]);
        write_file_atomic(run_dir / (record_digest(cfg, job.cell, job.si, job.ti, tasks[k]) + ".json"),
                          serialize_run_record(*recs[k]));
        ++executed;
      }
    }
    for (auto& r : recs) results[j].push_back(std::move(*r));
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress->executed += executed;
      progress->reused += reused;
    }
  });

  // Stable order: cell, task, structured seed, text seed.
  GridReport report;
  report.config = cfg;
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].cell == c) report.runs.push_back(results[j][k]);
      }
    }
  }
  return report;
}

std::vector<Task> grid_tasks(const ExperimentConfig& cfg) {
  std::vector<Task> tasks;
  if (cfg.classification) tasks.push_back({"classification", std::nullopt});
  for (const auto& m : cfg.methods) tasks.push_back({m, std::nullopt});
  return tasks;
}

std::vector<Task> ablation_tasks(const ExperimentConfig& cfg) {
  if (cfg.budgets.empty()) throw std::invalid_argument("ablation needs at least one labeled budget");
  std::vector<Task> tasks;
  for (std::size_t b : cfg.budgets) tasks.push_back({"measurement", b});
  for (std::size_t b : cfg.budgets) tasks.push_back({"plugin_labeled", b});
  return tasks;
}

}  // namespace

GridReport run_grid(const ExperimentConfig& cfg, GridProgress* progress) {
  return run_tasks(cfg, grid_tasks(cfg), progress, false);
}

GridReport run_ablation(const ExperimentConfig& cfg, GridProgress* progress) {
  return run_tasks(cfg, ablation_tasks(cfg), progress, false);
}

GridReport collect_report(const ExperimentConfig& cfg, bool ablation) {
  return run_tasks(cfg, ablation ? ablation_tasks(cfg) : grid_tasks(cfg), nullptr, true);
}

std::vector<CellSummary> GridReport::summaries() const {
  std::vector<CellSummary> out;
  std::map<std::tuple<std::size_t, std::string, std::int64_t>, std::size_t> index;
  std::vector<std::vector<double>> errors;
  for (const auto& r : runs) {
    const auto key = std::make_tuple(r.cell, r.method, r.budget ? static_cast<std::int64_t>(*r.budget) : -1);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      CellSummary s;
      s.cell = r.cell;
      s.method = r.method;
      s.budget = r.budget;
      out.push_back(s);
      errors.emplace_back();
    }
    CellSummary& s = out[it->second];
    ++s.runs;
    if (!r.ok) {
      ++s.failures;
      continue;
    }
    if (r.method != "classification") errors[it->second].push_back(r.report.abs_error);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    CellSummary& s = out[k];
    double est = 0.0, acc = 0.0;
    std::size_t n_est = 0, n_acc = 0;
    for (const auto& r : runs) {
      if (r.cell != s.cell || r.method != s.method || r.budget != s.budget || !r.ok) continue;
      if (r.method != "classification") est += r.report.estimate, ++n_est;
      if (r.accuracy) acc += *r.accuracy, ++n_acc;
    }
    const auto& e = errors[k];
    if (!e.empty()) {
      s.mean_abs_error = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
      s.mean_estimate = est / static_cast<double>(n_est);
      std::vector<double> boot;
      Rng rng(derive_seed(config.master_seed, "summary-ci", k));
      for (int b = 0; b < 100; ++b) {
        double m = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) m += e[rng.below(e.size())];
        boot.push_back(m / static_cast<double>(e.size()));
      }
      const auto [lo, hi] = percentile_interval(boot);
      s.ci_low = lo;
      s.ci_high = hi;
    }
    if (n_acc) s.mean_accuracy = acc / static_cast<double>(n_acc);
  }
  return out;
}

std::optional<CellSummary> GridReport::summary(std::size_t cell, const std::string& method,
                                               std::optional<std::size_t> budget) const {
  for (const auto& s : summaries()) {
    if (s.cell == cell && s.method == method && s.budget == budget) return s;
  }
  return std::nullopt;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<Correlation> accuracy_error_analysis(const GridReport& report) {
  std::vector<Correlation> out;
  std::vector<std::string> methods;
  for (const auto& r : report.runs) {
    if (r.method == "classification" || !r.ok || !r.accuracy) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  for (const auto& m : methods) {
    std::vector<double> acc, err;
    for (const auto& r : report.runs) {
      if (r.method == m && r.ok && r.accuracy) {
        acc.push_back(*r.accuracy);
        err.push_back(r.report.abs_error);
      }
    }
    out.push_back({to_string(report.config.dgp), m, acc.size(), pearson(acc, err)});
  }
  return out;
}

std::string estimates_csv(const std::vector<EstimateReport>& reports) {
  std::string out = kEstimateCsvHeader;
  out += '\n';
  for (const auto& r : reports) {
    out += r.method + "," + r.dgp + "," + std::to_string(r.structured_seed) + "," + std::to_string(r.text_seed) + "," +
           format_double(r.tau_word) + "," + format_double(r.delta_word) + "," + opt_double(r.tau_second) + "," +
           opt_double(r.delta_second) + "," + std::to_string(r.n) + "," + format_double(r.estimate) + "," +
           format_double(r.oracle) + "," + format_double(r.abs_error) + "," + opt_double(r.ci_low) + "," +
           opt_double(r.ci_high) + "\n";
  }
  return out;
}

std::vector<EstimateReport> parse_estimates_csv(std::string_view text) {
  std::vector<EstimateReport> out;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line_no == 1) {
      if (line != kEstimateCsvHeader) throw std::runtime_error("estimates csv: unexpected header");
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 14) throw std::runtime_error("estimates csv line " + std::to_string(line_no) + ": expected 14 fields");
    EstimateReport r;
    r.method = f[0];
    r.dgp = f[1];
    r.structured_seed = std::stoull(f[2]);
    r.text_seed = std::stoull(f[3]);
    r.tau_word = parse_double(f[4]);
    r.delta_word = parse_double(f[5]);
    r.tau_second = parse_opt_double(f[6]);
    r.delta_second = parse_opt_double(f[7]);
    r.n = static_cast<std::size_t>(parse_int(f[8]));
    r.estimate = parse_double(f[9]);
    r.oracle = parse_double(f[10]);
    r.abs_error = parse_double(f[11]);
    r.ci_low = parse_opt_double(f[12]);
    r.ci_high = parse_opt_double(f[13]);
    out.push_back(std::move(r));
  }
  return out;
}

void emit_report(const GridReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = report.config;
  auto cell_cols = [&](std::size_t c) {
    const auto& cell = cfg.cells.at(c);
    return format_double(cell.word.tau) + "," + format_double(cell.word.delta) + "," +
           (cell.second ? format_double(cell.second->tau) : "") + "," +
           (cell.second ? format_double(cell.second->delta) : "");
  };
  auto budget_text = [](const std::optional<std::size_t>& b) { return b ? std::to_string(*b) : std::string(); };

  std::vector<EstimateReport> estimates;
  for (const auto& r : report.runs) {
    if (r.ok && r.method != "classification") estimates.push_back(r.report);
  }
  write_file_atomic(dir / "estimates.csv", estimates_csv(estimates));

  const auto summaries = report.summaries();
  std::string errors =
      "cell,tau_word,delta_word,tau_second,delta_second,method,budget,runs,failures,mean_abs_error,mean_estimate,"
      "mean_accuracy,ci_low,ci_high\n";
  std::string accuracy = "cell,tau_word,delta_word,tau_second,delta_second,runs,failures,mean_accuracy\n";
  for (const auto& s : summaries) {
    if (s.method == "classification") {
      accuracy += std::to_string(s.cell) + "," + cell_cols(s.cell) + "," + std::to_string(s.runs) + "," +
                  std::to_string(s.failures) + "," + opt_double(s.mean_accuracy) + "\n";
      continue;
    }
    errors += std::to_string(s.cell) + "," + cell_cols(s.cell) + "," + s.method + "," + budget_text(s.budget) + "," +
              std::to_string(s.runs) + "," + std::to_string(s.failures) + "," + opt_double(s.mean_abs_error) + "," +
              opt_double(s.mean_estimate) + "," + opt_double(s.mean_accuracy) + "," + opt_double(s.ci_low) + "," +
              opt_double(s.ci_high) + "\n";
  }
  write_file_atomic(dir / "table_errors.csv", errors);
  write_file_atomic(dir / "table_accuracy.csv", accuracy);

  // Wide layout: one row per cell, one column per method (and budget).
  std::vector<std::string> columns;
  for (const auto& s : summaries) {
    if (s.method == "classification") continue;
    const std::string col = s.method + (s.budget ? "@" + std::to_string(*s.budget) : "");
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
  }
  std::string wide = "tau_word,delta_word,tau_second,delta_second";
  for (const auto& c : columns) wide += "," + c;
  wide += '\n';
  for (std::size_t c = 0; c < cfg.cells.size(); ++c) {
    wide += cell_cols(c);
    for (const auto& col : columns) {
      std::string v;
      for (const auto& s : summaries) {
        if (s.cell == c && s.method + (s.budget ? "@" + std::to_string(*s.budget) : "") == col) v = opt_double(s.mean_abs_error);
      }
      wide += "," + v;
    }
    wide += '\n';
  }
  write_file_atomic(dir / "table_errors_wide.csv", wide);

  std::string scatter = "method,cell,structured_seed,text_seed,budget,accuracy,abs_error\n";
  std::string failures = "method,cell,structured_seed,text_seed,budget,error\n";
  for (const auto& r : report.runs) {
    const std::string ids = r.method + "," + std::to_string(r.cell) + "," +
                            std::to_string(cfg.structured_seeds[r.structured_index]) + "," +
                            std::to_string(cfg.text_seeds[r.text_index]) + "," + budget_text(r.budget);
    if (!r.ok) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures += ids + "," + msg + "\n";
    } else if (r.method != "classification" && r.accuracy) {
      scatter += ids + "," + format_double(*r.accuracy) + "," + format_double(r.report.abs_error) + "\n";
    }
  }
  write_file_atomic(dir / "scatter.csv", scatter);
  write_file_atomic(dir / "failures.csv", failures);

  std::string corr = "dgp,method,points,pearson_r,defined\n";
  for (const auto& c : accuracy_error_analysis(report)) {
    corr += c.dgp + "," + c.method + "," + std::to_string(c.points) + "," + opt_double(c.r) + "," +
            (c.r ? "true" : "false") + "\n";
  }
  write_file_atomic(dir / "correlation.csv", corr);
}

}  // namespace textcausal
