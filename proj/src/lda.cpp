#include "textcausal/lda.hpp"

#include <sstream>
#include <stdexcept>

#include "textcausal/io.hpp"

namespace textcausal {

void LdaModel::validate() const {
  if (n_topics == 0 || topic_word.size() != n_topics || topic_prior.size() != n_topics) {
    throw std::invalid_argument("LdaModel: topic count mismatch");
  }
  for (const auto& row : topic_word) {
    if (row.size() != vocab.size()) throw std::invalid_argument("LdaModel: topic row / vocab size mismatch");
  }
}

LdaModel train_lda(const std::vector<TokenSequence>& corpus, const Vocab& vocab, const LdaOptions& o) {
  if (corpus.empty()) throw std::invalid_argument("train_lda: empty corpus");
  if (o.n_topics < 1) throw std::invalid_argument("train_lda: need at least one topic");
  const std::size_t k_topics = o.n_topics;
  const std::size_t v_size = vocab.size();

  LdaModel model;
  model.n_topics = k_topics;
  model.vocab = vocab;
  model.info = {o.corpus_id, o.iterations, o.seed, o.alpha, o.beta, 0, 0, 0};

  std::vector<const TokenSequence*> docs;
  for (const auto& d : corpus) {
    if (d.ids.empty()) {
      ++model.info.skipped_empty_documents;
      continue;
    }
    d.validate(vocab);
    docs.push_back(&d);
  }
  if (docs.empty()) throw std::invalid_argument("train_lda: every document is empty");
  model.info.documents = docs.size();

  std::vector<std::vector<std::uint32_t>> z(docs.size());
  std::vector<std::uint32_t> n_wk(v_size * k_topics, 0);
  std::vector<std::uint32_t> n_k(k_topics, 0);
  std::vector<std::vector<std::uint32_t>> n_dk(docs.size(), std::vector<std::uint32_t>(k_topics, 0));

  Rng rng(derive_seed(o.seed, "lda-train"));
  for (std::size_t d = 0; d < docs.size(); ++d) {
    z[d].resize(docs[d]->ids.size());
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      const auto k = static_cast<std::uint32_t>(rng.below(k_topics));
      z[d][i] = k;
      ++n_wk[docs[d]->ids[i] * k_topics + k];
      ++n_k[k];
      ++n_dk[d][k];
      ++model.info.tokens;
    }
  }

  const double v_beta = static_cast<double>(v_size) * o.beta;
  std::vector<double> weights(k_topics);
  for (std::size_t it = 0; it < o.iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& ids = docs[d]->ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const TokenId w = ids[i];
        std::uint32_t k = z[d][i];
        --n_wk[w * k_topics + k];
        --n_k[k];
        --n_dk[d][k];
        const std::uint32_t* row = &n_wk[w * k_topics];
        for (std::size_t t = 0; t < k_topics; ++t) {
          weights[t] = (n_dk[d][t] + o.alpha) * (row[t] + o.beta) / (n_k[t] + v_beta);
        }
        k = static_cast<std::uint32_t>(rng.categorical(weights));
        z[d][i] = k;
        ++n_wk[w * k_topics + k];
        ++n_k[k];
        ++n_dk[d][k];
      }
    }
  }

  std::vector<double> row(v_size);
  model.topic_word.reserve(k_topics);
  for (std::size_t t = 0; t < k_topics; ++t) {
    for (std::size_t w = 0; w < v_size; ++w) row[w] = n_wk[w * k_topics + t] + o.beta;
    model.topic_word.push_back(clamp_normalize(row));
  }
  std::vector<double> prior(k_topics);
  for (std::size_t t = 0; t < k_topics; ++t) prior[t] = n_k[t] + o.alpha;
  model.topic_prior = clamp_normalize(prior);
  return model;
}

TopicInference infer_topics(const LdaModel& model, const TokenSequence& doc, std::size_t sweeps, Seed seed) {
  const std::size_t k_topics = model.n_topics;
  TopicInference out;
  if (doc.ids.empty()) {
    out.proportions.assign(k_topics, 1.0 / static_cast<double>(k_topics));
    out.empty_document = true;
    return out;
  }
  doc.validate(model.vocab);
  const double alpha = model.info.alpha;
  Rng rng(seed);
  std::vector<std::uint32_t> z(doc.ids.size());
  std::vector<double> n_dk(k_topics, 0.0);
  std::vector<double> weights(k_topics);
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t t = 0; t < k_topics; ++t) weights[t] = model.topic_word[t][doc.ids[i]] * model.topic_prior[t];
    z[i] = static_cast<std::uint32_t>(rng.categorical(weights));
    n_dk[z[i]] += 1.0;
  }
  std::vector<double> acc(k_topics, 0.0);
  const std::size_t burn_in = sweeps / 2;
  std::size_t kept = 0;
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      n_dk[z[i]] -= 1.0;
      for (std::size_t t = 0; t < k_topics; ++t) weights[t] = (n_dk[t] + alpha) * model.topic_word[t][doc.ids[i]];
      z[i] = static_cast<std::uint32_t>(rng.categorical(weights));
      n_dk[z[i]] += 1.0;
    }
    if (s >= burn_in) {
      for (std::size_t t = 0; t < k_topics; ++t) acc[t] += n_dk[t] + alpha;
      ++kept;
    }
  }
  if (kept == 0) {
    for (std::size_t t = 0; t < k_topics; ++t) acc[t] = n_dk[t] + alpha;
  }
  double total = 0.0;
  for (double v : acc) total += v;
  for (double& v : acc) v /= total;
  out.proportions = std::move(acc);
  return out;
}

std::string LdaModel::serialize() const {
  validate();
  KeyValueRecord header;
  header.set("format", std::string("textcausal.lda.v1"));
  header.set_int("topics", static_cast<long long>(n_topics));
  header.set_int("vocab_size", static_cast<long long>(vocab.size()));
  header.set("corpus_id", info.corpus_id.empty() ? std::string("-") : info.corpus_id);
  header.set_int("iterations", static_cast<long long>(info.iterations));
  header.set("seed", std::to_string(info.seed));
  header.set("alpha", info.alpha);
  header.set("beta", info.beta);
  header.set_int("documents", static_cast<long long>(info.documents));
  header.set_int("tokens", static_cast<long long>(info.tokens));
  header.set_int("skipped_empty_documents", static_cast<long long>(info.skipped_empty_documents));
  std::ostringstream os;
  header.write(os);
  os << "vocab";
  for (const auto& t : vocab.tokens()) os << ' ' << t;
  os << "\nprior";
  for (double p : topic_prior.probs()) os << ' ' << format_double(p);
  os << '\n';
  for (std::size_t t = 0; t < n_topics; ++t) {
    os << "topic_" << t;
    for (double p : topic_word[t].probs()) os << ' ' << format_double(p);
    os << '\n';
  }
  return os.str();
}

LdaModel LdaModel::deserialize(std::string_view text) {
  const KeyValueRecord rec = KeyValueRecord::parse(text);
  if (rec.get("format") != "textcausal.lda.v1") throw std::runtime_error("lda model: unsupported format");
  LdaModel m;
  m.n_topics = static_cast<std::size_t>(rec.get_int("topics"));
  m.info.corpus_id = rec.get("corpus_id");
  m.info.iterations = static_cast<std::size_t>(rec.get_int("iterations"));
  m.info.seed = std::stoull(rec.get("seed"));
  m.info.alpha = rec.get_double("alpha");
  m.info.beta = rec.get_double("beta");
  m.info.documents = static_cast<std::size_t>(rec.get_int("documents"));
  m.info.tokens = static_cast<std::size_t>(rec.get_int("tokens"));
  m.info.skipped_empty_documents = static_cast<std::size_t>(rec.get_int("skipped_empty_documents"));

  auto numbers = [](const std::string& line) {
    std::vector<double> v;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) v.push_back(parse_double(tok));
    return v;
  };
  std::vector<std::string> toks;
  {
    std::istringstream is(rec.get("vocab"));
    std::string tok;
    while (is >> tok) toks.push_back(tok);
  }
  m.vocab = Vocab(std::move(toks));
  m.topic_prior = TokenDistribution::from_normalized(numbers(rec.get("prior")));
  for (std::size_t t = 0; t < m.n_topics; ++t) {
    m.topic_word.push_back(TokenDistribution::from_normalized(numbers(rec.get("topic_" + std::to_string(t)))));
  }
  m.validate();
  return m;
}

}  // namespace textcausal
