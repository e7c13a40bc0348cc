#include "textcausal/textgen.hpp"

#include <stdexcept>

namespace textcausal {

const char* to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::kTrivial: return "trivial";
    case DgpKind::kLda: return "lda";
    case DgpKind::kSequential: return "sequential";
  }
  return "?";
}

DgpKind dgp_from_string(std::string_view name) {
  if (name == "trivial") return DgpKind::kTrivial;
  if (name == "lda") return DgpKind::kLda;
  if (name == "sequential") return DgpKind::kSequential;
  throw std::invalid_argument("unknown dgp '" + std::string(name) + "'");
}

void TextEffectConfig::validate() const {
  word.validate();
  if (second) second->validate();
}

TextGenerator::TextGenerator(const TextEffectConfig& config, std::size_t length, std::size_t vocab_size,
                             std::optional<std::size_t> second_size)
    : config_(config), length_(length) {
  config_.validate();
  word_orderings_ = sample_ordering_pair(vocab_size, config_.word.tau, derive_seed(config_.ordering_seed, "word"));
  if (second_size) {
    if (!config_.second) throw std::invalid_argument("this dgp needs a second effect (topic or template)");
    second_orderings_ =
        sample_ordering_pair(*second_size, config_.second->tau, derive_seed(config_.ordering_seed, "second"));
  } else if (config_.second) {
    throw std::invalid_argument("the trivial dgp takes only a word effect");
  }
}

namespace {

EffectPairDistributions pair_for(const TokenDistribution& base, const EffectParams& params,
                                 const OrderingPair& orderings, EffectForm form) {
  return h(base, params.tau, params.delta, orderings, form);
}

}  // namespace

TrivialGenerator::TrivialGenerator(Vocab vocab, const TextEffectConfig& config, std::size_t n_tokens)
    : TextGenerator(config, n_tokens, vocab.size(), std::nullopt), vocab_(std::move(vocab)) {
  auto pair = pair_for(TokenDistribution::uniform(vocab_.size()), config_.word, word_orderings_, config_.form);
  dist_[0] = std::move(pair.p0);
  dist_[1] = std::move(pair.p1);
  for (int u = 0; u < 2; ++u) sampler_[u] = DiscreteSampler(dist_[u].probs());
}

TokenSequence TrivialGenerator::generate(int u, Seed seed) const {
  Rng rng(seed);
  TokenSequence seq;
  seq.ids.resize(length_);
  for (auto& id : seq.ids) id = static_cast<TokenId>(sampler_[u != 0](rng));
  return seq;
}

LdaGenerator::LdaGenerator(std::shared_ptr<const LdaModel> model, const TextEffectConfig& config,
                           std::size_t length)
    : TextGenerator(config, length, model->vocab.size(), model->n_topics), model_(std::move(model)) {
  auto topics = pair_for(model_->topic_prior, *config_.second, *second_orderings_, config_.form);
  topic_dist_[0] = std::move(topics.p0);
  topic_dist_[1] = std::move(topics.p1);
  const EffectKernelPair kernels(word_orderings_, config_.word.delta, config_.form);
  for (int u = 0; u < 2; ++u) {
    topic_sampler_[u] = DiscreteSampler(topic_dist_[u].probs());
    for (const auto& row : model_->topic_word) {
      word_dist_[u].push_back(kernels.for_u(u).apply(row));
      word_sampler_[u].emplace_back(word_dist_[u].back().probs());
    }
  }
}

TokenSequence LdaGenerator::generate(int u, Seed seed) const {
  Rng rng(seed);
  const int k = u != 0;
  TokenSequence seq;
  seq.ids.resize(length_);
  for (auto& id : seq.ids) {
    const std::size_t topic = topic_sampler_[k](rng);
    id = static_cast<TokenId>(word_sampler_[k][topic](rng));
  }
  return seq;
}

SequentialGenerator::SequentialGenerator(std::shared_ptr<const SequentialLm> lm,
                                         const std::vector<std::string>& templates,
                                         const TextEffectConfig& config, std::size_t max_len, std::string source)
    : TextGenerator(config, max_len, lm->vocab().size(), templates.size()),
      lm_(std::move(lm)),
      source_(std::move(source)),
      word_kernels_(word_orderings_, config_.word.delta, config_.form) {
  if (templates.empty()) throw std::invalid_argument("template set is empty");
  if (max_len < 1) throw std::invalid_argument("max_len must be at least 1");
  for (const auto& t : templates) templates_.push_back(encode(lm_->vocab(), t));
  auto pair = pair_for(TokenDistribution::uniform(templates.size()), *config_.second, *second_orderings_,
                       config_.form);
  template_dist_[0] = std::move(pair.p0);
  template_dist_[1] = std::move(pair.p1);
  for (int u = 0; u < 2; ++u) template_sampler_[u] = DiscreteSampler(template_dist_[u].probs());
}

TokenDistribution SequentialGenerator::step_distribution(int u, std::span<const TokenId> context) const {
  return word_kernels_.for_u(u != 0).apply(lm_->next(context));
}

TokenSequence SequentialGenerator::generate(int u, Seed seed) const {
  Rng rng(seed);
  const int k = u != 0;
  TokenSequence seq = templates_[template_sampler_[k](rng)];
  const auto end = lm_->end_token();
  std::vector<double> probs;
  for (std::size_t i = 0; i < length_; ++i) {
    const TokenDistribution base = lm_->next(seq.ids);
    word_kernels_.for_u(k).apply_into(base.probs(), probs);
    const auto next = static_cast<TokenId>(rng.categorical(probs));
    if (end && next == *end) break;
    seq.ids.push_back(next);
  }
  return seq;
}

TokenSequence generate_trivial(int u, const TextEffectConfig& cfg, std::size_t n_tokens, const Vocab& vocab,
                               Seed seed) {
  return TrivialGenerator(vocab, cfg, n_tokens).generate(u, seed);
}

TokenSequence generate_lda(const LdaModel& model, int u, const TextEffectConfig& cfg, std::size_t length,
                           Seed seed) {
  const std::shared_ptr<const LdaModel> view(std::shared_ptr<const LdaModel>(), &model);
  return LdaGenerator(view, cfg, length).generate(u, seed);
}

TokenSequence generate_sequential(std::shared_ptr<const SequentialLm> lm, int u, const TextEffectConfig& cfg,
                                  const std::vector<std::string>& templates, std::size_t max_len, Seed seed) {
  return SequentialGenerator(std::move(lm), templates, cfg, max_len).generate(u, seed);
}

}  // namespace textcausal
