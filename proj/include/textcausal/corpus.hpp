#pragma once

// Bundled desk-scale corpora. Both are generated deterministically from
// word banks compiled into the library, so no external download is needed.

#include <string>
#include <vector>

#include "textcausal/random.hpp"
#include "textcausal/text.hpp"

namespace textcausal {

struct Corpus {
  std::string id;
  Vocab vocab;
  std::vector<TokenSequence> documents;
};

// 6 subjects x 10 verb phrases, e.g. "the woman was known for".
const std::vector<std::string>& sentence_templates();

inline constexpr const char* kEndOfSentence = "</s>";

// Topical bag-of-words documents over a themed English word bank.
Corpus topical_corpus(std::size_t documents, Seed seed, std::size_t max_vocab = 5000);

// Template-led sentences ("the child was known for her ability to ...").
// The vocabulary covers every template word and ends with kEndOfSentence;
// documents do not contain the end marker.
Corpus sentence_corpus(std::size_t sentences, Seed seed);

}  // namespace textcausal
