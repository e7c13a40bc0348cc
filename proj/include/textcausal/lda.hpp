#pragma once

// Latent Dirichlet allocation trained by collapsed Gibbs sampling, plus
// fold-in inference of document topic proportions against a fixed model.

#include <string>
#include <vector>

#include "textcausal/effects.hpp"
#include "textcausal/random.hpp"
#include "textcausal/text.hpp"

namespace textcausal {

struct LdaTrainingInfo {
  std::string corpus_id;
  std::size_t iterations = 0;
  Seed seed = 0;
  double alpha = 0.1;
  double beta = 0.01;
  std::size_t documents = 0;
  std::size_t tokens = 0;
  std::size_t skipped_empty_documents = 0;
};

struct LdaModel {
  std::size_t n_topics = 0;
  std::vector<TokenDistribution> topic_word;  // one row per topic
  TokenDistribution topic_prior;              // corpus-level topic proportions
  Vocab vocab;
  LdaTrainingInfo info;

  void validate() const;

  // Flat text: a key-value header, then one "topic <k> <probs...>" line per
  // topic. Probabilities are written as shortest round-trip decimals.
  [[nodiscard]] std::string serialize() const;
  static LdaModel deserialize(std::string_view text);
};

struct LdaOptions {
  std::size_t n_topics = 50;
  double alpha = 0.1;
  double beta = 0.01;
  std::size_t iterations = 500;
  Seed seed = 0;
  std::string corpus_id = "unnamed";
};

// Throws std::invalid_argument for an empty corpus or fewer than one topic.
// Empty documents are skipped and counted in the training info.
LdaModel train_lda(const std::vector<TokenSequence>& corpus, const Vocab& vocab, const LdaOptions& options);

struct TopicInference {
  std::vector<double> proportions;  // sums to one
  bool empty_document = false;      // uniform proportions substituted
};

// Gibbs fold-in with topic-word rows held fixed; proportions average the
// post-burn-in sweeps.
TopicInference infer_topics(const LdaModel& model, const TokenSequence& doc, std::size_t sweeps, Seed seed);

}  // namespace textcausal
