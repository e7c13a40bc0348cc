#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "textcausal/corpus.hpp"
#include "textcausal/lda.hpp"
#include "textcausal/language_model.hpp"
#include "textcausal/textgen.hpp"

using namespace textcausal;

namespace {

std::vector<double> token_frequencies(const TextGenerator& gen, int u, std::size_t tokens, Seed seed) {
  std::vector<double> freq(gen.vocab().size(), 0.0);
  std::size_t seen = 0;
  for (std::size_t i = 0; seen < tokens; ++i) {
    for (TokenId id : gen.generate(u, derive_seed(seed, i)).ids) {
      freq[id] += 1.0;
      ++seen;
    }
  }
  for (auto& v : freq) v /= static_cast<double>(seen);
  return freq;
}

TokenSequence seq(std::initializer_list<TokenId> ids) { return TokenSequence{std::vector<TokenId>(ids)}; }

// Two topics over disjoint halves of a 20-word vocabulary.
std::vector<TokenSequence> two_topic_corpus(Seed seed) {
  Rng rng(seed);
  std::vector<TokenSequence> docs;
  for (int d = 0; d < 300; ++d) {
    const std::uint32_t base = rng.bernoulli(0.5) ? 10 : 0;
    TokenSequence s;
    for (int i = 0; i < 40; ++i) s.ids.push_back(base + static_cast<TokenId>(rng.below(10)));
    docs.push_back(s);
  }
  return docs;
}

TextEffectConfig effect(double tau, double delta, std::optional<EffectParams> second = std::nullopt,
                        EffectForm form = EffectForm::kZipfProduct) {
  TextEffectConfig c;
  c.word = {tau, delta};
  c.second = second;
  c.ordering_seed = 17;
  c.form = form;
  return c;
}

}  // namespace

TEST(Vocab, RoundTrip) {
  const auto v = Vocab::numbered(5);
  EXPECT_EQ(v.size(), 5u);
  const auto s = encode(v, "w00 w03 w04");
  EXPECT_EQ(s.ids, (std::vector<TokenId>{0, 3, 4}));
  EXPECT_EQ(decode(v, s), "w00 w03 w04");
  EXPECT_THROW(Vocab({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(seq({7}).validate(v), std::out_of_range);
}

TEST(Corpus, TemplatesAndSentences) {
  const auto& t = sentence_templates();
  EXPECT_EQ(t.size(), 60u);
  EXPECT_EQ(std::set<std::string>(t.begin(), t.end()).size(), 60u);
  const auto c = sentence_corpus(200, 1);
  EXPECT_EQ(c.documents.size(), 200u);
  EXPECT_EQ(c.vocab.tokens().back(), kEndOfSentence);
  for (const auto& tmpl : t) EXPECT_NO_THROW(encode(c.vocab, tmpl));
  const auto d = topical_corpus(100, 2);
  EXPECT_EQ(d.documents.size(), 100u);
  EXPECT_EQ(d.documents, topical_corpus(100, 2).documents);
  EXPECT_LE(d.vocab.size(), 5000u);
}

TEST(Trivial, ZeroDeltaGivesIdenticalDistributions) {
  TrivialGenerator gen(Vocab::numbered(16), effect(0.52, 0.0));
  EXPECT_EQ(gen.distribution(0), gen.distribution(1));
}

TEST(Trivial, WeakEffectNearlyOverlaps) {
  TrivialGenerator gen(Vocab::numbered(16), effect(0.1, 0.1));
  EXPECT_LT(total_variation(gen.distribution(0).probs(), gen.distribution(1).probs()), 0.15);
  for (double p : gen.distribution(0).probs()) EXPECT_NEAR(p, 1.0 / 16, 0.04);
}

TEST(Trivial, DistributionsComeFromEffect) {
  const auto cfg = effect(1.0, 0.9);
  TrivialGenerator gen(Vocab::numbered(4), cfg);
  const auto& op = gen.word_orderings();
  EXPECT_EQ(op.v1, VocabOrdering::reversed(4));
  for (int u = 0; u < 2; ++u) {
    const auto expected = apply_effect(TokenDistribution::uniform(4), u ? op.v1 : op.v0, 0.9, cfg.form);
    EXPECT_EQ(gen.distribution(u), expected);
    EXPECT_LE(total_variation(token_frequencies(gen, u, 1000000, 3 + u), expected.probs()), 0.01);
  }
}

TEST(Trivial, DeterministicAndShaped) {
  TrivialGenerator gen(Vocab::numbered(16), effect(0.52, 0.7));
  EXPECT_EQ(gen.generate(1, 99), gen.generate(1, 99));
  EXPECT_EQ(gen.generate(1, 99).ids.size(), 16u);
  EXPECT_EQ(generate_trivial(1, effect(0.52, 0.7), 16, Vocab::numbered(16), 99), gen.generate(1, 99));
}

TEST(TextEffectConfig, RejectsOutOfRange) {
  EXPECT_THROW(effect(1.2, 0.1).validate(), std::invalid_argument);
  EXPECT_THROW(effect(0.1, -0.1).validate(), std::invalid_argument);
  EXPECT_THROW(TrivialGenerator(Vocab::numbered(4), effect(0.1, 0.1, EffectParams{0.1, 0.1})), std::invalid_argument);
}

TEST(Lda, RecoversDisjointTopics) {
  const auto vocab = Vocab::numbered(20);
  LdaOptions opt;
  opt.n_topics = 2;
  opt.iterations = 100;
  opt.seed = 4;
  const auto model = train_lda(two_topic_corpus(1), vocab, opt);
  std::vector<double> half0(20, 0.0), half1(20, 0.0);
  for (int w = 0; w < 10; ++w) half0[w] = 0.1, half1[w + 10] = 0.1;
  const auto& r0 = model.topic_word[0].probs();
  const auto& r1 = model.topic_word[1].probs();
  const double direct = std::max(total_variation(r0, half0), total_variation(r1, half1));
  const double swapped = std::max(total_variation(r0, half1), total_variation(r1, half0));
  EXPECT_LE(std::min(direct, swapped), 0.1);
}

TEST(Lda, SingleTopicIsSmoothedUnigram) {
  const auto vocab = Vocab::numbered(20);
  const auto docs = two_topic_corpus(2);
  LdaOptions opt;
  opt.n_topics = 1;
  opt.iterations = 5;
  const auto model = train_lda(docs, vocab, opt);
  std::vector<double> counts(20, 0.0);
  double total = 0;
  for (const auto& d : docs)
    for (TokenId id : d.ids) counts[id] += 1, total += 1;
  for (int w = 0; w < 20; ++w) {
    EXPECT_NEAR(model.topic_word[0][w], (counts[w] + opt.beta) / (total + 20 * opt.beta), 1e-12);
  }
}

TEST(Lda, ZeroIterationsValidAndSerializes) {
  const auto vocab = Vocab::numbered(20);
  auto docs = two_topic_corpus(3);
  docs.push_back(TokenSequence{});
  LdaOptions opt;
  opt.n_topics = 3;
  opt.iterations = 0;
  const auto model = train_lda(docs, vocab, opt);
  EXPECT_NO_THROW(model.validate());
  EXPECT_EQ(model.info.skipped_empty_documents, 1u);
  const auto back = LdaModel::deserialize(model.serialize());
  EXPECT_EQ(back.serialize(), model.serialize());
  EXPECT_EQ(back.topic_word, model.topic_word);
  EXPECT_THROW(train_lda({}, vocab, opt), std::invalid_argument);
}

TEST(Lda, TrainingDeterministic) {
  const auto vocab = Vocab::numbered(20);
  LdaOptions opt;
  opt.n_topics = 4;
  opt.iterations = 20;
  opt.seed = 8;
  EXPECT_EQ(train_lda(two_topic_corpus(1), vocab, opt).serialize(), train_lda(two_topic_corpus(1), vocab, opt).serialize());
}

TEST(Lda, FoldInFindsTheRightTopic) {
  const auto vocab = Vocab::numbered(20);
  LdaOptions opt;
  opt.n_topics = 2;
  opt.iterations = 100;
  opt.seed = 4;
  const auto model = train_lda(two_topic_corpus(1), vocab, opt);
  const auto a = infer_topics(model, seq({0, 1, 2, 3, 4, 5, 6, 7}), 20, 1);
  const auto b = infer_topics(model, seq({10, 11, 12, 13, 14, 15, 16, 17}), 20, 1);
  EXPECT_GT(std::abs(a.proportions[0] - b.proportions[0]), 0.8);
  const auto e = infer_topics(model, TokenSequence{}, 20, 1);
  EXPECT_TRUE(e.empty_document);
  EXPECT_DOUBLE_EQ(e.proportions[0], 0.5);
}

TEST(Lda, ZeroEffectsKeepGenerativeMarginal) {
  const auto vocab = Vocab::numbered(20);
  LdaOptions opt;
  opt.n_topics = 3;
  opt.iterations = 30;
  auto model = std::make_shared<LdaModel>(train_lda(two_topic_corpus(5), vocab, opt));
  LdaGenerator gen(model, effect(0.3, 0.0, EffectParams{0.3, 0.0}));
  std::vector<double> marginal(20, 0.0);
  for (std::size_t t = 0; t < 3; ++t)
    for (int w = 0; w < 20; ++w) marginal[w] += model->topic_prior[t] * model->topic_word[t][w];
  for (int u = 0; u < 2; ++u) EXPECT_LE(total_variation(token_frequencies(gen, u, 1000000, 7), marginal), 0.01);
}

TEST(Lda, SingleTopicReducesToTrivialWithLdaBase) {
  const auto vocab = Vocab::numbered(20);
  LdaOptions opt;
  opt.n_topics = 1;
  opt.iterations = 3;
  auto model = std::make_shared<LdaModel>(train_lda(two_topic_corpus(6), vocab, opt));
  const auto cfg = effect(0.4, 0.6, EffectParams{0.2, 0.5});
  LdaGenerator gen(model, cfg);
  for (int u = 0; u < 2; ++u) {
    const auto& ord = u ? gen.word_orderings().v1 : gen.word_orderings().v0;
    EXPECT_EQ(gen.word_distribution(u, 0), apply_effect(model->topic_word[0], ord, 0.6, cfg.form));
    EXPECT_LE(total_variation(token_frequencies(gen, u, 400000, 9 + u), gen.word_distribution(u, 0).probs()), 0.01);
  }
}

TEST(Ngram, UnigramIgnoresContext) {
  const auto vocab = Vocab::numbered(3);
  const double k = 1e-6;
  auto lm = build_ngram_lm({seq({0, 0, 1}), seq({2, 0})}, vocab, 1, k);
  const auto p = lm->next({});
  EXPECT_NEAR(p[0], (3 + k) / (5 + 3 * k), 1e-12);
  EXPECT_NEAR(p[1], (1 + k) / (5 + 3 * k), 1e-12);
  const TokenId ctx[] = {2, 1};
  EXPECT_EQ(lm->next(ctx), p);
}

TEST(Ngram, BigramCounting) {
  const auto vocab = Vocab({"a", "b"});
  TokenSequence abab;
  for (int i = 0; i < 50; ++i) abab.ids.push_back(i % 2);
  const double k = 0.01;
  auto lm = build_ngram_lm({abab}, vocab, 2, k);
  const TokenId ctx[] = {0};
  // 25 "a b" transitions, add-k smoothing over 2 tokens.
  EXPECT_NEAR(lm->next(ctx)[1], (25 + k) / (25 + 2 * k), 1e-12);
}

TEST(Ngram, UnseenContextIsUniform) {
  const auto vocab = Vocab::numbered(4);
  auto lm = build_ngram_lm({seq({0, 1, 2})}, vocab, 3, 0.5);
  const TokenId ctx[] = {3, 3};
  const auto next = lm->next(ctx);
  for (double p : next.probs()) EXPECT_NEAR(p, 0.25, 1e-12);
  EXPECT_THROW(build_ngram_lm({}, vocab, 2, 0.1), std::invalid_argument);
  EXPECT_THROW(build_ngram_lm({seq({0})}, vocab, 0, 0.1), std::invalid_argument);
}

TEST(Sequential, StepsAreEffectAdjustedLmConditionals) {
  const auto vocab = Vocab({"x", "y"});
  std::vector<TokenSequence> corpus{seq({0, 1, 1, 0, 1}), seq({1, 1, 0})};
  std::shared_ptr<const SequentialLm> lm = build_ngram_lm(corpus, vocab, 2, 0.3);
  const std::vector<std::string> templates{"x", "y", "x y"};
  const auto cfg = effect(1.0, 0.5, EffectParams{0.5, 0.4});
  SequentialGenerator gen(lm, templates, cfg, 6);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    TokenSequence ctx;
    for (std::size_t i = 0, n = rng.below(5); i < n; ++i) ctx.ids.push_back(static_cast<TokenId>(rng.below(2)));
    for (int u = 0; u < 2; ++u) {
      const auto& ord = u ? gen.word_orderings().v1 : gen.word_orderings().v0;
      const auto expected = apply_effect(lm->next(ctx.ids), ord, 0.5, cfg.form);
      const auto got = gen.step_distribution(u, ctx.ids);
      for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(got[i], expected[i], 1e-15);
    }
  }
}

TEST(Sequential, ZeroEffectsArePlainLmSampling) {
  const auto corpus = sentence_corpus(500, 3);
  std::shared_ptr<const SequentialLm> lm =
      build_ngram_lm(corpus.documents, corpus.vocab, 3, 0.01, corpus.vocab.id(kEndOfSentence));
  SequentialGenerator gen(lm, sentence_templates(), effect(0.2, 0.0, EffectParams{0.3, 0.0}), 32);
  for (int u = 0; u < 2; ++u) {
    for (double p : gen.template_distribution(u).probs()) EXPECT_NEAR(p, 1.0 / 60, 1e-12);
  }
  const TokenId ctx[] = {corpus.vocab.id("the"), corpus.vocab.id("man")};
  const auto step = gen.step_distribution(1, ctx);
  const auto plain = lm->next(ctx);
  for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(step[i], plain[i], 1e-15);
  const auto s = gen.generate(0, 5);
  EXPECT_EQ(s, gen.generate(0, 5));
  EXPECT_LE(s.ids.size(), 32u + 8u);
  for (TokenId id : s.ids) EXPECT_NE(id, corpus.vocab.id(kEndOfSentence));
}

TEST(Sequential, StrongWordEffectFavoursTopRankedWords) {
  const auto corpus = sentence_corpus(2000, 3);
  std::shared_ptr<const SequentialLm> lm =
      build_ngram_lm(corpus.documents, corpus.vocab, 3, 0.01, corpus.vocab.id(kEndOfSentence));
  double previous = -1.0;
  for (double delta : {0.0, 0.3, 0.6, 0.9}) {
    SequentialGenerator gen(lm, sentence_templates(), effect(0.5, delta, EffectParams{0.0, 0.0}), 32);
    const auto& v0 = gen.word_orderings().v0;
    double top_share = 0;
    std::size_t n = 0;
    for (Seed s = 0; s < 300; ++s) {
      for (TokenId id : gen.generate(0, s).ids) {
        top_share += v0.rank(id) <= 10 ? 1.0 : 0.0;
        ++n;
      }
    }
    top_share /= static_cast<double>(n);
    EXPECT_GT(top_share, previous);
    previous = top_share;
  }
}
