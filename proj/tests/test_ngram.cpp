#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chunkcheck/ngram.hpp"
#include "chunkcheck/tokenizer.hpp"

using namespace chunkcheck;

namespace {

// Log-free oracle: multiply conditional probabilities directly.
double perplexity_oracle(const NGramLM& lm, const std::string& text) {
  auto tokens = normalize_tokens(text);
  double prod = 1.0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    prod *= lm.cond_prob(tokens, i);
  return std::pow(prod, -1.0 / static_cast<double>(tokens.size()));
}

// Fixed per-position probabilities, for closed-form checks.
class FixedScorer : public Scorer {
 public:
  explicit FixedScorer(std::vector<double> probs) : probs_(std::move(probs)) {}
  double log_prob(const std::vector<std::string>&, std::size_t i) const override {
    return std::log(probs_.at(i));
  }

 private:
  std::vector<double> probs_;
};

}  // namespace

TEST_CASE("train_lm validation") {
  CHECK_THROWS(train_lm({}, 1, 0.5));
  CHECK_THROWS(train_lm({"a"}, 0, 0.5));
  CHECK_THROWS(train_lm({"a"}, 1, 0.0));
}

TEST_CASE("unigram symmetry at small k") {
  NGramLM lm = train_lm({"a b a b"}, 1, 1e-9);
  auto toks = normalize_tokens("a b");
  CHECK(lm.cond_prob(toks, 0) == doctest::Approx(lm.cond_prob(toks, 1)));
  CHECK(lm.cond_prob(toks, 0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("huge k drives probabilities to uniform 1/V") {
  NGramLM lm = train_lm({"a b c a"}, 1, 1e9);
  auto toks = normalize_tokens("a");
  // V = 3 types + UNK
  CHECK(std::abs(lm.cond_prob(toks, 0) - 0.25) < 1e-6);
}

TEST_CASE("bigram count ratio at small k") {
  NGramLM lm = train_lm({"a b a b a b a b"}, 2, 1e-12);
  auto toks = normalize_tokens("a b");
  CHECK(lm.cond_prob(toks, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("perplexity closed forms") {
  // P = 1 everywhere -> perplexity 1
  FixedScorer ones({1.0, 1.0, 1.0});
  CHECK(perplexity(ones, "x y z") == doctest::Approx(1.0).epsilon(1e-12));

  // uniform over V tokens -> perplexity V (V = 1000, untrained add-k model)
  std::vector<std::string> vocab;
  for (int i = 0; i < 999; ++i) vocab.push_back("w" + std::to_string(i));
  NGramLM uniform(1, 0.01, vocab);  // V = 999 + UNK = 1000
  CHECK(std::abs(perplexity(uniform, "w1 w500 w3") - 1000.0) < 1e-9);

  // hand evaluation: P = (0.5, 0.25, 0.125) -> 4.0
  FixedScorer hand({0.5, 0.25, 0.125});
  CHECK(perplexity(hand, "x y z") == doctest::Approx(4.0).epsilon(1e-12));

  CHECK_THROWS(perplexity(ones, ""));
}

TEST_CASE("perplexity matches the direct-product oracle") {
  NGramLM lm = train_lm({"the cat sat on the mat", "the dog sat on the rug",
                         "a cat and a dog met"},
                        3, 0.01);
  std::mt19937_64 rng(5);
  std::vector<std::string> words = {"the", "cat", "dog", "sat", "on",
                                    "mat", "rug", "a",   "and", "zulu"};
  std::uniform_int_distribution<std::size_t> wi(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> len(1, 20);
  for (int trial = 0; trial < 30; ++trial) {
    std::string text;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) text += ' ';
      text += words[wi(rng)];
    }
    const double got = perplexity(lm, text);
    const double want = perplexity_oracle(lm, text);
    CHECK(std::abs(got - want) / want < 1e-9);
  }
}

TEST_CASE("perplexity invariant to surface form with same token stream") {
  NGramLM lm = train_lm({"alpha beta gamma"}, 2, 0.1);
  CHECK(perplexity(lm, "Alpha   BETA gamma") ==
        doctest::Approx(perplexity(lm, "alpha beta gamma")).epsilon(1e-15));
}

TEST_CASE("conditional probabilities sum to 1 over the vocabulary") {
  NGramLM lm = train_lm({"a b b c"}, 2, 0.3);
  // histories: after "a", after "b", and an unseen history
  for (const std::string& h : {"a", "b", "zzz"}) {
    double total = 0.0;
    for (const std::string& w : {"a", "b", "c", "unseenword"}) {
      auto toks = normalize_tokens(h + " " + w);
      total += lm.cond_prob(toks, 1);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("verify_corpus report") {
  NGramLM lm = train_lm({"the cat sat", "the dog sat"}, 2, 0.1);
  std::vector<std::string> orig = {"the cat sat", "the dog sat"};
  PerplexityReport same = verify_corpus(lm, orig, orig);
  CHECK(same.delta == doctest::Approx(0.0));
  CHECK(same.original.count == 2);

  // appending one uniform-noise text raises the injected mean
  std::vector<std::string> injected = orig;
  injected.push_back("qq zz pp kk vv");
  PerplexityReport worse = verify_corpus(lm, orig, injected);
  CHECK(worse.injected.mean_ppl > worse.original.mean_ppl);
  CHECK(worse.delta > 0.0);

  CHECK(worse.to_json().find("mean_ppl") != std::string::npos);
  CHECK_THROWS(verify_corpus(lm, {}, injected));
}
