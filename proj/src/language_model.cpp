#include "textcausal/language_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace textcausal {

namespace {
// Context slots before the first token hold this marker.
constexpr std::uint64_t kBoundary = (1ULL << 21) - 1;
}  // namespace

NgramLm::NgramLm(Vocab vocab, std::size_t order, double smoothing, std::optional<TokenId> end_token)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing), end_token_(end_token) {
  if (order_ < 1 || order_ > kMaxOrder) throw std::invalid_argument("NgramLm: order must be in [1, 4]");
  if (!(smoothing_ > 0.0)) throw std::invalid_argument("NgramLm: smoothing must be positive");
  if (vocab_.size() >= kBoundary) throw std::invalid_argument("NgramLm: vocabulary too large");
  if (end_token_ && *end_token_ >= vocab_.size()) throw std::invalid_argument("NgramLm: end token outside vocabulary");
}

std::uint64_t NgramLm::context_key(std::span<const TokenId> context) const {
  std::uint64_t key = 0;
  const std::size_t width = order_ - 1;
  for (std::size_t j = 0; j < width; ++j) {
    // Slot j holds the token j+1 positions back.
    const std::uint64_t v = j < context.size() ? context[context.size() - 1 - j] : kBoundary;
    key = (key << 21) | v;
  }
  return key;
}

void NgramLm::add_sequence(std::span<const TokenId> seq) {
  std::vector<TokenId> full(seq.begin(), seq.end());
  if (end_token_) full.push_back(*end_token_);
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i] >= vocab_.size()) throw std::out_of_range("NgramLm: token outside vocabulary");
    auto& cc = counts_[context_key(std::span<const TokenId>(full.data(), i))];
    cc.total += 1.0;
    auto it = std::find_if(cc.next.begin(), cc.next.end(), [&](const auto& p) { return p.first == full[i]; });
    if (it == cc.next.end()) {
      cc.next.emplace_back(full[i], 1.0);
    } else {
      it->second += 1.0;
    }
  }
}

TokenDistribution NgramLm::next(std::span<const TokenId> context) const {
  const double v = static_cast<double>(vocab_.size());
  std::vector<double> p(vocab_.size(), smoothing_);
  double total = smoothing_ * v;
  if (auto it = counts_.find(context_key(context)); it != counts_.end()) {
    for (const auto& [tok, count] : it->second.next) p[tok] += count;
    total += it->second.total;
  }
  for (double& x : p) x /= total;
  return clamp_normalize(p);
}

std::unique_ptr<NgramLm> build_ngram_lm(const std::vector<TokenSequence>& corpus, const Vocab& vocab,
                                        std::size_t order, double smoothing, std::optional<TokenId> end_token) {
  if (corpus.empty()) throw std::invalid_argument("build_ngram_lm: empty corpus");
  auto lm = std::make_unique<NgramLm>(vocab, order, smoothing, end_token);
  for (const auto& seq : corpus) lm->add_sequence(seq.ids);
  return lm;
}

}  // namespace textcausal
