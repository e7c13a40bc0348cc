#pragma once

// Text generators for the three DGP families. Each draws T given U only,
// routing every sampling distribution through the effect kernels.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "textcausal/effects.hpp"
#include "textcausal/language_model.hpp"
#include "textcausal/lda.hpp"
#include "textcausal/text.hpp"

namespace textcausal {

enum class DgpKind { kTrivial, kLda, kSequential };

const char* to_string(DgpKind kind);
DgpKind dgp_from_string(std::string_view name);

struct TextEffectConfig {
  EffectParams word;
  // Topic effect for LDA, template effect for the sequential DGP, absent for
  // the trivial DGP.
  std::optional<EffectParams> second;
  Seed ordering_seed = 0;
  EffectForm form = EffectForm::kZipfProduct;

  void validate() const;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;

  [[nodiscard]] virtual DgpKind kind() const = 0;
  [[nodiscard]] virtual const Vocab& vocab() const = 0;
  // Pure function of (u, seed).
  [[nodiscard]] virtual TokenSequence generate(int u, Seed seed) const = 0;
  // Corpus or model identifier recorded in dataset metadata.
  [[nodiscard]] virtual std::string source() const = 0;

  [[nodiscard]] const TextEffectConfig& config() const { return config_; }
  [[nodiscard]] std::size_t length() const { return length_; }
  [[nodiscard]] const OrderingPair& word_orderings() const { return word_orderings_; }
  [[nodiscard]] const std::optional<OrderingPair>& second_orderings() const { return second_orderings_; }

 protected:
  TextGenerator(const TextEffectConfig& config, std::size_t length, std::size_t vocab_size,
                std::optional<std::size_t> second_size);

  TextEffectConfig config_;
  std::size_t length_;
  OrderingPair word_orderings_;
  std::optional<OrderingPair> second_orderings_;
};

// Uniform base distribution; tokens i.i.d. given u.
class TrivialGenerator final : public TextGenerator {
 public:
  TrivialGenerator(Vocab vocab, const TextEffectConfig& config, std::size_t n_tokens = 16);

  [[nodiscard]] DgpKind kind() const override { return DgpKind::kTrivial; }
  [[nodiscard]] const Vocab& vocab() const override { return vocab_; }
  [[nodiscard]] TokenSequence generate(int u, Seed seed) const override;
  [[nodiscard]] std::string source() const override { return "uniform"; }
  [[nodiscard]] const TokenDistribution& distribution(int u) const { return dist_[u]; }

 private:
  Vocab vocab_;
  TokenDistribution dist_[2];
  DiscreteSampler sampler_[2];
};

class LdaGenerator final : public TextGenerator {
 public:
  LdaGenerator(std::shared_ptr<const LdaModel> model, const TextEffectConfig& config, std::size_t length = 32);

  [[nodiscard]] DgpKind kind() const override { return DgpKind::kLda; }
  [[nodiscard]] const Vocab& vocab() const override { return model_->vocab; }
  [[nodiscard]] TokenSequence generate(int u, Seed seed) const override;
  [[nodiscard]] std::string source() const override { return model_->info.corpus_id; }
  [[nodiscard]] const TokenDistribution& topic_distribution(int u) const { return topic_dist_[u]; }
  [[nodiscard]] const TokenDistribution& word_distribution(int u, std::size_t topic) const {
    return word_dist_[u][topic];
  }

 private:
  std::shared_ptr<const LdaModel> model_;
  TokenDistribution topic_dist_[2];
  DiscreteSampler topic_sampler_[2];
  std::vector<TokenDistribution> word_dist_[2];
  std::vector<DiscreteSampler> word_sampler_[2];
};

// Template first, then autoregressive words until max_len generated tokens
// or the model's end token (which is not emitted). Output includes the
// template tokens.
class SequentialGenerator final : public TextGenerator {
 public:
  SequentialGenerator(std::shared_ptr<const SequentialLm> lm, const std::vector<std::string>& templates,
                      const TextEffectConfig& config, std::size_t max_len = 32, std::string source = "lm");

  [[nodiscard]] DgpKind kind() const override { return DgpKind::kSequential; }
  [[nodiscard]] const Vocab& vocab() const override { return lm_->vocab(); }
  [[nodiscard]] TokenSequence generate(int u, Seed seed) const override;
  [[nodiscard]] std::string source() const override { return source_; }
  [[nodiscard]] const TokenDistribution& template_distribution(int u) const { return template_dist_[u]; }
  [[nodiscard]] const EffectKernelPair& word_kernels() const { return word_kernels_; }
  [[nodiscard]] const std::vector<TokenSequence>& templates() const { return templates_; }

  // One decoding step: the effect-adjusted next-token distribution.
  [[nodiscard]] TokenDistribution step_distribution(int u, std::span<const TokenId> context) const;

 private:
  std::shared_ptr<const SequentialLm> lm_;
  std::vector<TokenSequence> templates_;
  std::string source_;
  TokenDistribution template_dist_[2];
  DiscreteSampler template_sampler_[2];
  EffectKernelPair word_kernels_;
};

TokenSequence generate_trivial(int u, const TextEffectConfig& cfg, std::size_t n_tokens, const Vocab& vocab,
                               Seed seed);
TokenSequence generate_lda(const LdaModel& model, int u, const TextEffectConfig& cfg, std::size_t length,
                           Seed seed);
TokenSequence generate_sequential(std::shared_ptr<const SequentialLm> lm, int u, const TextEffectConfig& cfg,
                                  const std::vector<std::string>& templates, std::size_t max_len, Seed seed);

}  // namespace textcausal
