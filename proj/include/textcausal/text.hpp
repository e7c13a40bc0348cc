#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace textcausal {

using TokenId = std::uint32_t;

// Distinct token strings; a token's id is its position.
class Vocab {
 public:
  Vocab() = default;
  // Throws std::invalid_argument on duplicates or an empty list.
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab numbered(std::size_t n, std::string_view prefix = "w");

  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] const std::string& token(TokenId id) const { return tokens_.at(id); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
  [[nodiscard]] bool contains(std::string_view token) const;
  // Throws std::out_of_range for unknown tokens.
  [[nodiscard]] TokenId id(std::string_view token) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
  std::vector<TokenId> ids;

  // Throws std::out_of_range if any id falls outside the vocabulary.
  void validate(const Vocab& vocab) const;
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Lower-cases and splits on whitespace; every piece must be in the vocab.
TokenSequence encode(const Vocab& vocab, std::string_view text);
std::string decode(const Vocab& vocab, const TokenSequence& seq);
std::vector<std::string> tokenize(std::string_view text);

}  // namespace textcausal
