#include "chunkcheck/synthesis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "chunkcheck/tokenizer.hpp"

namespace chunkcheck {

std::string to_string(HallucinationType t) {
  switch (t) {
    case HallucinationType::kNone:
      return "none";
    case HallucinationType::kBaseless:
      return "baseless";
    case HallucinationType::kContradictory:
      return "contradictory";
  }
  return "none";
}

HallucinationType hallucination_type_from_string(const std::string& s) {
  if (s == "none") return HallucinationType::kNone;
  if (s == "baseless") return HallucinationType::kBaseless;
  if (s == "contradictory") return HallucinationType::kContradictory;
  throw std::invalid_argument("unknown hallucination type: " + s);
}

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kStop = {
      "a",    "an",   "the",  "and",  "or",    "but",  "of",   "in",
      "on",   "at",   "to",   "for",  "with",  "by",   "from", "as",
      "is",   "are",  "was",  "were", "be",    "been", "has",  "have",
      "had",  "it",   "its",  "this", "that",  "these", "those", "he",
      "she",  "they", "them", "his",  "her",   "their", "you",  "your",
      "not",  "no",   "so",   "if",   "then",  "than",  "too",  "very",
      "can",  "will", "just", "into", "about", "over",  "after", "before",
      "during", "through", "also", "any", "all", "some", "more", "most"};
  return kStop;
}

// Entities reserved for fabricated sentences; the toy grammar and normal
// summaries never use them.
const std::vector<std::string>& reserved_entities() {
  static const std::vector<std::string> kEntities = {
      "zorvath",  "quellinor", "thalmere",  "ondrisel",  "veyra",
      "brimshaw", "kaldrix",   "nerivane",  "oskutan",   "pellegrin",
      "yarrowmoor", "dravenhall"};
  return kEntities;
}

const std::vector<std::string>& baseless_templates() {
  static const std::vector<std::string> kTemplates = {
      "Later accounts suggest that {entity} secretly shaped the {topic}.",
      "Some historians insist that {entity} was behind the {topic} all "
      "along.",
      "It is rumored that {entity} documented the {topic} in a lost "
      "journal.",
      "A disputed source claims that {entity} financed the {topic}."};
  return kTemplates;
}

// Both directions. "reliable" is deliberately absent so copula negation
// handles it.
const std::unordered_map<std::string, std::string>& antonyms() {
  static const std::unordered_map<std::string, std::string> kMap = [] {
    std::vector<std::pair<std::string, std::string>> pairs = {
        {"useless", "essential"}, {"strong", "weak"},
        {"large", "small"},       {"ancient", "modern"},
        {"fragile", "sturdy"},    {"hostile", "friendly"},
        {"scarce", "plentiful"},  {"always", "never"},
        {"rises", "falls"},       {"guilty", "innocent"},
        {"open", "closed"},       {"victorious", "defeated"},
        {"loyal", "treacherous"}, {"bright", "dim"},
        {"generous", "miserly"},  {"famous", "obscure"},
        {"crowded", "deserted"},  {"peaceful", "violent"}};
    std::unordered_map<std::string, std::string> m;
    for (auto& [a, b] : pairs) {
      m[a] = b;
      m[b] = a;
    }
    return m;
  }();
  return kMap;
}

const std::unordered_set<std::string>& negatable_verbs() {
  static const std::unordered_set<std::string> kVerbs = {
      "is", "are", "was", "were", "has", "have", "can", "should", "will"};
  return kVerbs;
}

std::string lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = std::tolower(static_cast<unsigned char>(c));
  return out;
}

// Word with leading/trailing punctuation stripped, lowercased.
std::string core_of(const std::string& word) {
  std::size_t a = 0, b = word.size();
  while (a < b && !std::isalnum(static_cast<unsigned char>(word[a]))) ++a;
  while (b > a && !std::isalnum(static_cast<unsigned char>(word[b - 1]))) --b;
  return lower(word.substr(a, b - a));
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string topic_word(const std::string& summary) {
  auto tokens = normalize_tokens(summary);
  std::unordered_map<std::string, std::size_t> freq;
  std::vector<std::string> order;
  for (const auto& t : tokens) {
    if (t.size() < 3 || stopwords().count(t)) continue;
    if (!std::isalpha(static_cast<unsigned char>(t[0]))) continue;
    if (freq[t]++ == 0) order.push_back(t);
  }
  std::string best = "story";
  std::size_t best_n = 0;
  for (const auto& t : order) {
    if (freq[t] > best_n) {
      best = t;
      best_n = freq[t];
    }
  }
  return best;
}

std::string fill_template(std::string tmpl, const std::string& entity,
                          const std::string& topic) {
  auto replace_all = [](std::string& s, const std::string& from,
                        const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(tmpl, "{entity}", entity);
  replace_all(tmpl, "{topic}", topic);
  return tmpl;
}

std::string capitalize_like(const std::string& replacement,
                            const std::string& original) {
  std::string out = replacement;
  if (!original.empty() && !out.empty() &&
      std::isupper(static_cast<unsigned char>(original[0])))
    out[0] = std::toupper(static_cast<unsigned char>(out[0]));
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Injection inject_baseless_rule(const std::string& summary,
                               std::uint64_t seed) {
  auto sentences = split_sentences(summary);
  if (sentences.empty())
    throw std::invalid_argument("inject_baseless_rule: summary has no sentences");
  std::mt19937_64 rng(seed);

  // entity guaranteed absent from the summary
  const std::string low = lower(summary);
  const auto& pool = reserved_entities();
  std::size_t start = rng() % pool.size();
  std::string entity;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string& cand = pool[(start + i) % pool.size()];
    if (low.find(cand) == std::string::npos) {
      entity = cand;
      entity[0] = std::toupper(static_cast<unsigned char>(entity[0]));
      break;
    }
  }
  if (entity.empty())
    throw std::invalid_argument(
        "inject_baseless_rule: no reserved entity absent from summary");

  const auto& templates = baseless_templates();
  std::string sentence = fill_template(templates[rng() % templates.size()],
                                       entity, topic_word(summary));
  const std::size_t pos = rng() % (sentences.size() + 1);
  sentences.insert(sentences.begin() + pos, sentence);
  return {join(sentences), static_cast<int>(pos)};
}

Injection inject_contradictory_rule(const std::string& summary,
                                    std::uint64_t seed) {
  auto sentences = split_sentences(summary);
  if (sentences.empty())
    throw std::invalid_argument(
        "inject_contradictory_rule: summary has no sentences");

  // candidates: sentences with an antonym word or a negatable verb
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (const auto& w : split_words(sentences[i])) {
      const std::string c = core_of(w);
      if (antonyms().count(c) || negatable_verbs().count(c)) {
        candidates.push_back(i);
        break;
      }
    }
  }
  if (candidates.empty())
    throw NoCandidateError("no negatable sentence in summary");

  std::mt19937_64 rng(seed);
  const std::size_t si = candidates[rng() % candidates.size()];
  auto words = split_words(sentences[si]);

  bool done = false;
  // antonym substitution takes precedence over copula negation
  for (std::size_t i = 0; i < words.size() && !done; ++i) {
    const std::string c = core_of(words[i]);
    auto it = antonyms().find(c);
    if (it == antonyms().end()) continue;
    const std::size_t at = lower(words[i]).find(c);
    words[i] = words[i].substr(0, at) +
               capitalize_like(it->second, words[i].substr(at)) +
               words[i].substr(at + c.size());
    done = true;
  }
  for (std::size_t i = 0; i < words.size() && !done; ++i) {
    if (!negatable_verbs().count(core_of(words[i]))) continue;
    if (i + 1 < words.size() && core_of(words[i + 1]) == "not") {
      words.erase(words.begin() + i + 1);
    } else {
      words.insert(words.begin() + i + 1, "not");
    }
    done = true;
  }
  if (!done) throw NoCandidateError("no negatable pattern in chosen sentence");

  sentences[si] = join(words);
  return {join(sentences), static_cast<int>(si)};
}

const std::string& baseless_prompt() {
  static const std::string kPrompt =
      "Add a complete sentence that is related to the topic but introduces "
      "some new information you make up. You can add the sentence anywhere "
      "in the paragraph but make sure it is a complete sentence and the "
      "paragraph is coherent. Reply with the whole paragraph that includes "
      "the sentence you added.";
  return kPrompt;
}

const std::string& contradictory_prompt() {
  static const std::string kPrompt =
      "Given the paragraph, rewrite one sentence completely so that it "
      "utterly contradicts from its original sentence. You can choose any "
      "sentence in the paragraph but make sure the paragraph is still "
      "coherent and now has a claim that contradicts the original "
      "paragraph. Reply with the whole paragraph after the change.";
  return kPrompt;
}

std::string inject_llm(const std::string& summary, HallucinationType type,
                       const ChatFn& chat) {
  if (!chat) throw std::invalid_argument("inject_llm: no chat client configured");
  const std::string& prompt = type == HallucinationType::kBaseless
                                  ? baseless_prompt()
                                  : contradictory_prompt();
  const std::string reply = chat(prompt, summary);
  if (reply.empty() || reply == summary)
    throw InjectionRejected("LLM reply empty or identical to input");
  return reply;
}

std::vector<LabeledExample> synthesize_dataset(
    const std::vector<DocumentPair>& pairs, const SynthesisOptions& opt) {
  if (opt.corruption_prob < 0.0 || opt.corruption_prob > 1.0)
    throw std::invalid_argument("corruption probability must be in [0,1]");
  std::mt19937_64 rng(opt.seed);
  std::bernoulli_distribution corrupt(opt.corruption_prob);
  std::bernoulli_distribution pick_baseless(0.5);

  std::vector<LabeledExample> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    LabeledExample ex;
    ex.id = pair.id;
    ex.context = pair.context;
    ex.response = pair.reference;

    const bool do_corrupt = opt.corruption_prob >= 1.0 ||
                            (opt.corruption_prob > 0.0 && corrupt(rng));
    if (!do_corrupt) {
      out.push_back(std::move(ex));
      continue;
    }
    const HallucinationType requested = pick_baseless(rng)
                                            ? HallucinationType::kBaseless
                                            : HallucinationType::kContradictory;
    const std::uint64_t inj_seed = mix_seed(opt.seed, i);
    try {
      if (opt.injector == InjectorKind::kRule) {
        Injection inj;
        HallucinationType actual = requested;
        if (requested == HallucinationType::kContradictory) {
          try {
            inj = inject_contradictory_rule(pair.reference, inj_seed);
          } catch (const NoCandidateError&) {
            inj = inject_baseless_rule(pair.reference, inj_seed);
            actual = HallucinationType::kBaseless;
            ex.fallback = true;
          }
        } else {
          inj = inject_baseless_rule(pair.reference, inj_seed);
        }
        ex.response = inj.text;
        ex.injected_sentence_index = inj.sentence_index;
        ex.type = actual;
        ex.injector = "rule";
      } else {
        ex.response = inject_llm(pair.reference, requested, opt.chat);
        ex.type = requested;
        ex.injector = "llm";
      }
      ex.hallucinated = true;
    } catch (const std::exception& e) {
      std::cerr << "warning: injection failed for pair " << pair.id << ": "
                << e.what() << "; emitting as faithful\n";
      ex = LabeledExample{};
      ex.id = pair.id;
      ex.context = pair.context;
      ex.response = pair.reference;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<LabeledExample>& examples,
                           double train_ratio, double dev_ratio,
                           double test_ratio, std::uint64_t seed) {
  if (train_ratio <= 0 || dev_ratio <= 0 || test_ratio <= 0)
    throw std::invalid_argument("split_dataset: ratios must be positive");
  if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  if (examples.size() < 3)
    throw std::invalid_argument("split_dataset: fewer examples than splits");

  std::vector<std::size_t> idx(examples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const std::size_t n = examples.size();
  std::size_t n_train = static_cast<std::size_t>(n * train_ratio);
  std::size_t n_dev = static_cast<std::size_t>(n * dev_ratio);
  n_train = std::max<std::size_t>(1, std::min(n_train, n - 2));
  n_dev = std::max<std::size_t>(1, std::min(n_dev, n - n_train - 1));

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = examples[idx[i]];
    if (i < n_train)
      split.train.push_back(ex);
    else if (i < n_train + n_dev)
      split.dev.push_back(ex);
    else
      split.test.push_back(ex);
  }
  return split;
}

namespace {

const std::vector<std::string>& toy_entities() {
  static const std::vector<std::string> v = {
      "Arden",  "Belric", "Caswyn",   "Doria",  "Edmund",
      "Fiora",  "Garron", "Helena",   "Isolde", "Jasper",
      "Katrin", "Lorcan", "Mira",     "Nolan",  "Orla",
      "Petra",  "Quinn",  "Rosalind", "Stefan", "Tamsin"};
  return v;
}

const std::vector<std::string>& toy_places() {
  static const std::vector<std::string> v = {
      "harbor",  "citadel",    "valley", "monastery", "archive",
      "garrison", "orchard",   "quarry", "lighthouse", "market"};
  return v;
}

const std::vector<std::string>& toy_objects() {
  static const std::vector<std::string> v = {
      "amulet",  "ledger", "treaty",  "manuscript", "relic",
      "banner",  "compass", "chalice", "map",        "seal"};
  return v;
}

const std::vector<std::string>& toy_adjectives() {
  static const std::vector<std::string> v = {
      "ancient", "fragile", "hostile", "scarce",  "loyal",
      "bright",  "generous", "large",  "strong",  "open",
      "famous",  "crowded",  "peaceful", "ornate", "weathered"};
  return v;
}

const std::vector<std::string>& toy_events() {
  static const std::vector<std::string> v = {
      "siege",      "council", "festival",   "rebellion", "expedition",
      "trial",      "coronation", "harvest", "voyage",    "negotiation"};
  return v;
}

std::size_t count_words(const std::string& s) {
  return split_words(s).size();
}

}  // namespace

std::vector<DocumentPair> make_toy_corpus(std::size_t n, std::uint64_t seed,
                                          std::size_t target_context_tokens) {
  std::vector<DocumentPair> pairs;
  pairs.reserve(n);
  for (std::size_t doc = 0; doc < n; ++doc) {
    std::mt19937_64 rng(mix_seed(seed, doc));
    auto pick = [&rng](const std::vector<std::string>& pool) {
      return pool[rng() % pool.size()];
    };
    std::vector<std::string> sentences;
    std::size_t tokens = 0;
    while (tokens < target_context_tokens) {
      std::string s;
      switch (rng() % 6) {
        case 0:
          s = pick(toy_entities()) + " traveled to the " + pick(toy_places()) +
              " before the " + pick(toy_events()) + ".";
          break;
        case 1:
          s = "The " + pick(toy_objects()) + " was " + pick(toy_adjectives()) +
              ".";
          break;
        case 2:
          s = pick(toy_entities()) + " entrusted the " + pick(toy_objects()) +
              " to " + pick(toy_entities()) + " during the " +
              pick(toy_events()) + ".";
          break;
        case 3:
          s = "The " + pick(toy_places()) + " remained " +
              pick(toy_adjectives()) + " throughout the " + pick(toy_events()) +
              ".";
          break;
        case 4:
          s = pick(toy_entities()) + " recorded the " + pick(toy_events()) +
              " in the " + pick(toy_objects()) + ".";
          break;
        default:
          s = "The " + pick(toy_events()) + " at the " + pick(toy_places()) +
              " was " + pick(toy_adjectives()) + ".";
          break;
      }
      tokens += count_words(s);
      sentences.push_back(std::move(s));
    }

    // reference: a handful of context facts, restated in document order
    const std::size_t n_ref = 3 + rng() % 3;
    std::vector<std::size_t> chosen;
    std::vector<std::size_t> all(sentences.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::shuffle(all.begin(), all.end(), rng);
    chosen.assign(all.begin(),
                  all.begin() + std::min(n_ref, all.size()));
    std::sort(chosen.begin(), chosen.end());

    DocumentPair pair;
    std::ostringstream id;
    id << "toy-" << std::setw(6) << std::setfill('0') << doc;
    pair.id = id.str();
    pair.context = join(sentences);
    std::vector<std::string> ref;
    for (std::size_t i : chosen) ref.push_back(sentences[i]);
    pair.reference = join(ref);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// --- JSONL ---

std::string example_to_json(const LabeledExample& ex) {
  nlohmann::json j;
  j["id"] = ex.id;
  j["context"] = ex.context;
  j["response"] = ex.response;
  j["label"] = ex.hallucinated ? "hallucinated" : "faithful";
  j["hallucination_type"] = to_string(ex.type);
  if (ex.injected_sentence_index)
    j["injected_sentence_index"] = *ex.injected_sentence_index;
  if (!ex.injector.empty()) j["injector"] = ex.injector;
  if (ex.fallback) j["fallback"] = true;
  return j.dump();
}

LabeledExample example_from_json(const std::string& line, bool strict) {
  nlohmann::json j = nlohmann::json::parse(line);
  static const std::unordered_set<std::string> kKnown = {
      "id",      "context",  "response", "label",
      "hallucination_type", "injected_sentence_index", "injector", "fallback"};
  if (strict) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!kKnown.count(it.key()))
        throw std::invalid_argument("unknown dataset field: " + it.key());
  }
  LabeledExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.context = j.at("context").get<std::string>();
  ex.response = j.at("response").get<std::string>();
  const std::string label = j.at("label").get<std::string>();
  if (label != "faithful" && label != "hallucinated")
    throw std::invalid_argument("unknown label: " + label);
  ex.hallucinated = label == "hallucinated";
  ex.type = hallucination_type_from_string(
      j.value("hallucination_type", std::string("none")));
  if ((ex.type == HallucinationType::kNone) == ex.hallucinated)
    throw std::invalid_argument(
        "label and hallucination_type are inconsistent for id " + ex.id);
  if (j.contains("injected_sentence_index"))
    ex.injected_sentence_index = j["injected_sentence_index"].get<int>();
  ex.injector = j.value("injector", std::string());
  ex.fallback = j.value("fallback", false);
  return ex;
}

void save_dataset(const std::string& path,
                  const std::vector<LabeledExample>& examples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& ex : examples) f << example_to_json(ex) << '\n';
}

std::vector<LabeledExample> load_dataset(const std::string& path,
                                         bool strict) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read dataset file: " + path);
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(line, strict));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

void save_pairs(const std::string& path,
                const std::vector<DocumentPair>& pairs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write pairs file: " + path);
  for (const auto& p : pairs) {
    nlohmann::json j{{"id", p.id}, {"context", p.context},
                     {"reference", p.reference}};
    f << j.dump() << '\n';
  }
}

std::vector<DocumentPair> load_pairs(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read pairs file: " + path);
  std::vector<DocumentPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(),
                     j.at("context").get<std::string>(),
                     j.at("reference").get<std::string>()});
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

}  // namespace chunkcheck
