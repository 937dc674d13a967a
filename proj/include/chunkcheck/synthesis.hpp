#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chunkcheck {

struct DocumentPair {
  std::string id;
  std::string context;    // long document
  std::string reference;  // faithful summary
};

enum class HallucinationType { kNone, kBaseless, kContradictory };

std::string to_string(HallucinationType t);
HallucinationType hallucination_type_from_string(const std::string& s);

struct LabeledExample {
  std::string id;
  std::string context;
  std::string response;
  bool hallucinated = false;
  HallucinationType type = HallucinationType::kNone;
  std::optional<int> injected_sentence_index;
  std::string injector;  // "rule" or "llm"; empty for faithful examples
  bool fallback = false; // contradictory request degraded to baseless
};

class NoCandidateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InjectionRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Injection {
  std::string text;
  int sentence_index = 0;
};

// Inserts one fabricated sentence at a seeded sentence boundary. The
// sentence names an entity from a reserved list guaranteed absent from the
// summary and fills a topic slot with the summary's most frequent
// non-stopword.
Injection inject_baseless_rule(const std::string& summary, std::uint64_t seed);

// Flips one sentence: antonym substitution if a lexicon word is present,
// otherwise insert/remove "not" around a copula or auxiliary. Sentence count
// is unchanged. Throws NoCandidateError when nothing is negatable.
Injection inject_contradictory_rule(const std::string& summary,
                                    std::uint64_t seed);

// chat(system_prompt, user_content) -> reply
using ChatFn =
    std::function<std::string(const std::string&, const std::string&)>;

// Prompt texts sent by the LLM injector.
const std::string& baseless_prompt();
const std::string& contradictory_prompt();

// Sends the injection prompt with the summary; validates that the reply is
// non-empty and differs from the input.
std::string inject_llm(const std::string& summary, HallucinationType type,
                       const ChatFn& chat);

enum class InjectorKind { kRule, kLlm };

struct SynthesisOptions {
  double corruption_prob = 0.5;
  std::uint64_t seed = 0;
  InjectorKind injector = InjectorKind::kRule;
  ChatFn chat;  // required for kLlm
};

// Per pair: corrupt with probability p; on corruption pick baseless vs
// contradictory uniformly. Injector failures emit the pair as faithful with a
// warning instead of aborting.
std::vector<LabeledExample> synthesize_dataset(
    const std::vector<DocumentPair>& pairs, const SynthesisOptions& opt);

struct DatasetSplit {
  std::vector<LabeledExample> train, dev, test;
};

DatasetSplit split_dataset(const std::vector<LabeledExample>& examples,
                           double train_ratio, double dev_ratio,
                           double test_ratio, std::uint64_t seed);

// Seeded grammar over entities, events and attributes; references restate a
// subset of context facts verbatim.
std::vector<DocumentPair> make_toy_corpus(std::size_t n, std::uint64_t seed,
                                          std::size_t target_context_tokens =
                                              2000);

// JSONL dataset format, one example per line.
std::string example_to_json(const LabeledExample& ex);
LabeledExample example_from_json(const std::string& line, bool strict = true);
void save_dataset(const std::string& path,
                  const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> load_dataset(const std::string& path,
                                         bool strict = true);

void save_pairs(const std::string& path,
                const std::vector<DocumentPair>& pairs);
std::vector<DocumentPair> load_pairs(const std::string& path);

}  // namespace chunkcheck
