#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace chunkcheck {

// Pluggable perplexity scorer: log-probability of token i given the
// preceding tokens. Natural log.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double log_prob(const std::vector<std::string>& tokens,
                          std::size_t i) const = 0;
};

// Add-k smoothed n-gram model. Conditional probabilities sum to 1 over the
// prediction vocabulary (corpus types + UNK) for any history.
class NGramLM : public Scorer {
 public:
  NGramLM(std::size_t order, double k, std::vector<std::string> vocab);

  std::size_t order() const { return order_; }
  double smoothing() const { return k_; }
  // Prediction vocabulary size V, including UNK.
  std::size_t vocab_size() const { return vocab_.size() + 1; }

  void observe(const std::vector<std::string>& tokens);
  // P(token | previous order-1 tokens), histories BOS-padded at the start.
  double cond_prob(const std::vector<std::string>& tokens,
                   std::size_t i) const;
  double log_prob(const std::vector<std::string>& tokens,
                  std::size_t i) const override;

 private:
  int word_id(const std::string& w) const;
  std::string history_key(const std::vector<std::string>& tokens,
                          std::size_t i, std::size_t n) const;

  std::size_t order_;
  double k_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> word_ids_;
  // Per order n in 1..order: history (n-1 ids) -> word id -> count.
  std::vector<std::unordered_map<std::string,
                                 std::unordered_map<int, std::size_t>>>
      counts_;
  std::vector<std::unordered_map<std::string, std::size_t>> history_totals_;
};

NGramLM train_lm(const std::vector<std::string>& corpus, std::size_t order,
                 double k);

// exp(-(1/N) * sum_i log P(w_i | history)). Throws if the text has no tokens.
double perplexity(const Scorer& lm, const std::string& text);

struct GroupStats {
  std::size_t count = 0;
  double mean_ppl = 0.0;
  double median_ppl = 0.0;
};

struct PerplexityReport {
  GroupStats original;
  GroupStats injected;
  double delta = 0.0;  // injected mean - original mean

  std::string to_json() const;
};

PerplexityReport verify_corpus(const Scorer& lm,
                               const std::vector<std::string>& originals,
                               const std::vector<std::string>& injected);

}  // namespace chunkcheck
