#include "textcausal/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace textcausal {

namespace {

std::vector<std::string> words(const char* s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

const std::vector<std::vector<std::string>>& themes() {
  static const std::vector<std::vector<std::string>> t = [] {
    const char* banks[] = {
        "doctor nurse hospital patient clinic medicine surgery treatment disease symptom diagnosis "
        "prescription therapy vaccine infection recovery ward emergency physician health pain fever "
        "injury blood heart lung cancer chronic dose pharmacy",
        "election vote senator congress campaign policy government president party ballot law bill "
        "minister parliament debate democracy governor candidate poll reform legislation voter "
        "constitution cabinet mayor diplomat treaty coalition opposition",
        "football soccer team coach player league season match goal score championship tournament "
        "stadium fans referee injury playoff victory defeat striker defender basketball baseball "
        "pitcher quarterback athlete medal olympic training",
        "computer software internet network server data algorithm program code developer database "
        "website digital online user device smartphone app cloud security encryption processor "
        "memory hardware startup platform browser laptop",
        "market stock investor bank economy trade profit revenue shares price inflation interest "
        "growth finance dollar currency debt loan budget tax earnings quarter fund capital wealth "
        "credit recession exports",
        "music album song band concert singer guitar record tour audience melody lyrics studio "
        "rhythm drums piano orchestra composer festival chart release pop jazz rock vocals stage",
        "film movie actor actress director scene camera script cinema screen premiere role sequel "
        "studio hollywood comedy drama character audience critic oscar trailer production cast "
        "documentary animation",
        "school student teacher classroom university college lesson exam degree education campus "
        "professor lecture homework curriculum graduate learning library tuition semester course "
        "scholarship principal grade textbook",
        "farm farmer crop harvest wheat corn soil field cattle tractor barn orchard seed irrigation "
        "drought livestock dairy grain rural village pasture fertilizer plow sheep goat",
        "ocean sea ship sailor harbor island coast wave boat fishing storm tide beach port voyage "
        "captain anchor deck navy whale shore lighthouse current reef sailboat",
        "police crime court judge trial lawyer arrest prison officer suspect evidence jury "
        "verdict detective investigation witness robbery sentence prosecutor guilty theft warrant "
        "charge attorney testimony",
        "kitchen recipe cook chef bread cheese soup dinner restaurant meal flavor sauce butter "
        "garlic onion oven bake dessert sugar spice salad breakfast lunch menu taste",
        "river mountain forest tree valley lake hill trail park wildlife bird wolf bear deer snow "
        "climate weather rain wind landscape desert canyon meadow nature hiking",
        "church faith prayer god temple priest belief worship holy spirit religion bible sacred "
        "ritual soul heaven monk saint congregation sermon chapel pilgrim mercy blessing",
        "war army soldier battle troops military enemy weapon attack general commander invasion "
        "fighting regiment tank artillery veteran defense frontline siege rifle casualties "
        "surrender uniform",
        "science research scientist laboratory experiment theory physics chemistry biology "
        "molecule atom energy particle discovery study hypothesis microscope evolution genome "
        "universe galaxy planet telescope orbit",
        "car road highway driver traffic engine vehicle truck train railway station airport "
        "flight passenger bus bicycle journey travel ticket route bridge tunnel fuel speed",
        "family mother father child son daughter brother sister wedding marriage husband wife "
        "baby grandmother grandfather home parents cousin birthday holiday neighbor friendship "
        "love childhood household",
        "art painting artist gallery museum sculpture canvas exhibition portrait color painter "
        "design drawing poetry poem novel author writer book story chapter literature publisher "
        "reader fiction",
        "city building street apartment neighborhood downtown tower construction architect "
        "housing rent office district skyline plaza subway mall traffic residents council "
        "property landlord suburb bridge",
    };
    std::vector<std::vector<std::string>> out;
    for (const char* b : banks) out.push_back(words(b));
    return out;
  }();
  return t;
}

const std::vector<std::string>& function_words() {
  static const std::vector<std::string> f = words(
      "the of and to in a is that for it was on with as by at from his her they this be are "
      "have had not but or which one were all their there been would when who more about into");
  return f;
}

std::vector<std::string> subjects() {
  return {"the man", "the woman", "the person", "the child", "the neighbor", "the stranger"};
}

std::vector<std::string> verb_phrases() {
  return {"was known for",   "was described as", "was regarded as",     "was thought of as", "was well-known for",
          "worked as",       "had a job as",     "had a part-time job as", "earned money by", "started working as"};
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

struct Grammar {
  std::vector<std::string> pron = words("his her their");
  std::vector<std::string> trait = words("kindness honesty courage humor patience talent generosity wit");
  std::vector<std::string> verb = words("sing paint teach listen cook dance write build heal draw");
  std::vector<std::string> media = words("film play show series novel story band");
  std::vector<std::string> adj = words(
      "kind honest quiet brave smart friendly careful strange gentle loud curious proud calm");
  std::vector<std::string> person = words("person worker leader friend artist neighbor citizen");
  std::vector<std::string> people = words("people workers leaders artists citizens teachers");
  std::vector<std::string> place = words("city town village country school family community");
  std::vector<std::string> occ = words(
      "teacher nurse doctor cook waiter driver clerk guard painter farmer writer mechanic cashier "
      "lawyer baker");
  std::vector<std::string> workplace = words("hospital school restaurant bank store factory office hotel farm");
  std::vector<std::string> gerund = words("selling cleaning fixing driving teaching painting cooking writing");
  std::vector<std::string> object = words("cars houses books food clothes computers furniture bikes");
  std::vector<std::string> day = words("weekends mondays holidays evenings");
  std::vector<std::string> number = words("two three five ten many");
  std::vector<std::string> past = words("moved returned traveled went came");
};

std::string continuation(std::size_t verb_index, Rng& rng, const Grammar& g) {
  std::ostringstream os;
  switch (verb_index) {
    case 0:
    case 4: {
      const auto& p = pick(g.pron, rng);
      switch (rng.below(4)) {
        case 0: os << p << ' ' << pick(g.trait, rng) << " in the " << pick(g.place, rng); break;
        case 1: os << p << " ability to " << pick(g.verb, rng); break;
        case 2: os << p << " role in the " << pick(g.media, rng); break;
        default: os << p << " work on the " << pick(g.media, rng) << " about the " << pick(g.place, rng); break;
      }
      break;
    }
    case 1:
    case 2:
    case 3:
      if (rng.below(3) == 0) {
        os << "one of the most " << pick(g.adj, rng) << ' ' << pick(g.people, rng) << " in the " << pick(g.place, rng);
      } else {
        os << "a " << pick(g.adj, rng);
        if (rng.bernoulli(0.4)) os << " and " << pick(g.adj, rng);
        os << ' ' << pick(g.person, rng);
        if (rng.bernoulli(0.3)) os << " who liked to " << pick(g.verb, rng);
      }
      break;
    case 8:
      os << pick(g.gerund, rng) << ' ' << pick(g.object, rng);
      if (rng.bernoulli(0.5)) os << " at the " << pick(g.workplace, rng);
      if (rng.bernoulli(0.4)) os << " on " << pick(g.day, rng);
      break;
    default:
      os << "a " << pick(g.occ, rng);
      if (rng.bernoulli(0.6)) os << " at the " << pick(g.workplace, rng);
      if (rng.bernoulli(0.3)) os << " in the " << pick(g.place, rng);
      if (rng.bernoulli(0.3)) os << " for " << pick(g.number, rng) << " years";
      break;
  }
  if (rng.bernoulli(0.25)) {
    os << " and " << pick(g.pron, rng) << " family " << pick(g.past, rng) << " to the " << pick(g.place, rng);
  }
  return os.str();
}

}  // namespace

const std::vector<std::string>& sentence_templates() {
  static const std::vector<std::string> t = [] {
    std::vector<std::string> out;
    for (const auto& s : subjects())
      for (const auto& v : verb_phrases()) out.push_back(s + " " + v);
    return out;
  }();
  return t;
}

Corpus topical_corpus(std::size_t documents, Seed seed, std::size_t max_vocab) {
  const auto& th = themes();
  const auto& fw = function_words();

  // Vocabulary: function words first, then theme words in bank order.
  std::vector<std::string> vocab_tokens;
  std::set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (vocab_tokens.size() < max_vocab && seen.insert(w).second) vocab_tokens.push_back(w);
  };
  for (const auto& w : fw) add(w);
  for (const auto& bank : th)
    for (const auto& w : bank) add(w);
  Corpus corpus{"topical-desk-v1-seed" + std::to_string(seed), Vocab(vocab_tokens), {}};
  const Vocab& vocab = corpus.vocab;

  // Within a theme, word frequencies follow a Zipf law over a seeded shuffle.
  Rng rng(derive_seed(seed, "topical-corpus"));
  std::vector<std::vector<TokenId>> theme_ids;
  std::vector<DiscreteSampler> theme_samplers;
  for (const auto& bank : th) {
    std::vector<TokenId> ids;
    for (const auto& w : bank) {
      if (vocab.contains(w)) ids.push_back(vocab.id(w));
    }
    rng.shuffle(ids);
    std::vector<double> wts(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) wts[i] = 1.0 / static_cast<double>(i + 1);
    theme_ids.push_back(std::move(ids));
    theme_samplers.emplace_back(wts);
  }
  std::vector<TokenId> fw_ids;
  for (const auto& w : fw) fw_ids.push_back(vocab.id(w));
  std::vector<double> fw_wts(fw_ids.size());
  for (std::size_t i = 0; i < fw_ids.size(); ++i) fw_wts[i] = 1.0 / std::sqrt(static_cast<double>(i + 1));
  const DiscreteSampler fw_sampler(fw_wts);

  corpus.documents.reserve(documents);
  for (std::size_t d = 0; d < documents; ++d) {
    const std::size_t n_themes = 1 + rng.below(3);
    std::vector<std::size_t> doc_themes;
    std::vector<double> mix;
    for (std::size_t j = 0; j < n_themes; ++j) {
      doc_themes.push_back(rng.below(th.size()));
      mix.push_back(j == 0 ? 2.0 + rng.uniform() : rng.uniform());
    }
    const std::size_t length = 40 + rng.below(61);
    TokenSequence doc;
    doc.ids.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      if (rng.bernoulli(0.25)) {
        doc.ids.push_back(fw_ids[fw_sampler(rng)]);
      } else {
        const std::size_t t = doc_themes[rng.categorical(mix)];
        doc.ids.push_back(theme_ids[t][theme_samplers[t](rng)]);
      }
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Corpus sentence_corpus(std::size_t sentences, Seed seed) {
  const Grammar g;
  Rng rng(derive_seed(seed, "sentence-corpus"));
  const auto subj = subjects();
  const auto verbs = verb_phrases();

  std::vector<std::vector<std::string>> raw;
  raw.reserve(sentences);
  for (std::size_t i = 0; i < sentences; ++i) {
    const std::size_t v = rng.below(verbs.size());
    raw.push_back(tokenize(pick(subj, rng) + " " + verbs[v] + " " + continuation(v, rng, g)));
  }

  // Vocabulary in first-seen order over templates, then sentences.
  std::vector<std::string> vocab_tokens;
  std::set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (seen.insert(w).second) vocab_tokens.push_back(w);
  };
  for (const auto& t : sentence_templates())
    for (const auto& w : tokenize(t)) add(w);
  for (const auto& s : raw)
    for (const auto& w : s) add(w);
  add(kEndOfSentence);

  Corpus corpus{"sentence-desk-v1-seed" + std::to_string(seed), Vocab(vocab_tokens), {}};
  corpus.documents.reserve(raw.size());
  for (const auto& s : raw) {
    TokenSequence seq;
    for (const auto& w : s) seq.ids.push_back(corpus.vocab.id(w));
    corpus.documents.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace textcausal
