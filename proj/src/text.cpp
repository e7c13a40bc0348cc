#include "textcausal/text.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace textcausal {

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw std::invalid_argument("Vocab: empty token list");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("Vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::numbered(std::size_t n, std::string_view prefix) {
  std::vector<std::string> t;
  t.reserve(n);
  const int width = n > 100 ? 3 : 2;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, i);
    t.push_back(std::string(prefix) + buf);
  }
  return Vocab(std::move(t));
}

bool Vocab::contains(std::string_view token) const { return index_.contains(std::string(token)); }

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw std::out_of_range("Vocab: unknown token '" + std::string(token) + "'");
  return it->second;
}

void TokenSequence::validate(const Vocab& vocab) const {
  for (TokenId t : ids) {
    if (t >= vocab.size()) throw std::out_of_range("TokenSequence: id " + std::to_string(t) + " outside vocabulary");
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TokenSequence encode(const Vocab& vocab, std::string_view text) {
  TokenSequence seq;
  for (const auto& tok : tokenize(text)) seq.ids.push_back(vocab.id(tok));
  return seq;
}

std::string decode(const Vocab& vocab, const TokenSequence& seq) {
  std::string out;
  for (TokenId t : seq.ids) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(t);
  }
  return out;
}

}  // namespace textcausal
