#pragma once

// Next-token language models behind one contract, so the sequential text
// generator can run against the built-in n-gram model or an out-of-process
// neural model alike.

#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "textcausal/effects.hpp"
#include "textcausal/text.hpp"

namespace textcausal {

class SequentialLm {
 public:
  virtual ~SequentialLm() = default;

  [[nodiscard]] virtual const Vocab& vocab() const = 0;
  // Distribution over the next token given everything generated so far
  // (template tokens included). Must be a pure function of the context.
  [[nodiscard]] virtual TokenDistribution next(std::span<const TokenId> context) const = 0;
  [[nodiscard]] virtual std::optional<TokenId> end_token() const = 0;
  // False when queries must be serialized by the caller.
  [[nodiscard]] virtual bool concurrent_queries() const { return true; }
};

// Add-k smoothed conditional frequency model over a fixed-order context.
class NgramLm final : public SequentialLm {
 public:
  static constexpr std::size_t kMaxOrder = 4;

  NgramLm(Vocab vocab, std::size_t order, double smoothing, std::optional<TokenId> end_token);

  void add_sequence(std::span<const TokenId> seq);

  [[nodiscard]] const Vocab& vocab() const override { return vocab_; }
  [[nodiscard]] TokenDistribution next(std::span<const TokenId> context) const override;
  [[nodiscard]] std::optional<TokenId> end_token() const override { return end_token_; }

  [[nodiscard]] std::size_t order() const { return order_; }
  [[nodiscard]] double smoothing() const { return smoothing_; }
  [[nodiscard]] std::size_t context_count() const { return counts_.size(); }

 private:
  struct ContextCounts {
    double total = 0.0;
    std::vector<std::pair<TokenId, double>> next;
  };

  [[nodiscard]] std::uint64_t context_key(std::span<const TokenId> context) const;

  Vocab vocab_;
  std::size_t order_;
  double smoothing_;
  std::optional<TokenId> end_token_;
  std::unordered_map<std::uint64_t, ContextCounts> counts_;
};

// Each corpus sequence is treated as a sentence; when end_token is set it is
// appended to every sequence during counting. Throws std::invalid_argument on
// an empty corpus, order 0 or order above NgramLm::kMaxOrder.
std::unique_ptr<NgramLm> build_ngram_lm(const std::vector<TokenSequence>& corpus, const Vocab& vocab,
                                        std::size_t order, double smoothing,
                                        std::optional<TokenId> end_token = std::nullopt);

}  // namespace textcausal
