#include "chunkcheck/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "chunkcheck/tokenizer.hpp"

namespace chunkcheck {

namespace {
const std::string kBos = "\x01bos";
}

NGramLM::NGramLM(std::size_t order, double k, std::vector<std::string> vocab)
    : order_(order), k_(k), vocab_(std::move(vocab)) {
  if (order_ < 1) throw std::invalid_argument("NGramLM: order must be >= 1");
  if (k_ <= 0.0) throw std::invalid_argument("NGramLM: smoothing k must be > 0");
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    word_ids_[vocab_[i]] = static_cast<int>(i);
  counts_.resize(order_);
  history_totals_.resize(order_);
}

int NGramLM::word_id(const std::string& w) const {
  auto it = word_ids_.find(w);
  return it == word_ids_.end() ? static_cast<int>(vocab_.size()) : it->second;
}

std::string NGramLM::history_key(const std::vector<std::string>& tokens,
                                 std::size_t i, std::size_t n) const {
  // n-gram order n: history is the n-1 tokens before position i, BOS-padded.
  std::string key;
  for (std::size_t back = n - 1; back >= 1; --back) {
    if (i >= back) {
      key += std::to_string(word_id(tokens[i - back]));
    } else {
      key += "B";
    }
    key += ',';
  }
  return key;
}

void NGramLM::observe(const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int w = word_id(tokens[i]);
    for (std::size_t n = 1; n <= order_; ++n) {
      const std::string key = history_key(tokens, i, n);
      ++counts_[n - 1][key][w];
      ++history_totals_[n - 1][key];
    }
  }
}

double NGramLM::cond_prob(const std::vector<std::string>& tokens,
                          std::size_t i) const {
  const std::size_t n = order_;
  const std::string key = history_key(tokens, i, n);
  const int w = word_id(tokens[i]);
  std::size_t cw = 0, ch = 0;
  auto hit = counts_[n - 1].find(key);
  if (hit != counts_[n - 1].end()) {
    auto wit = hit->second.find(w);
    if (wit != hit->second.end()) cw = wit->second;
  }
  auto tit = history_totals_[n - 1].find(key);
  if (tit != history_totals_[n - 1].end()) ch = tit->second;
  const double v = static_cast<double>(vocab_size());
  return (static_cast<double>(cw) + k_) / (static_cast<double>(ch) + k_ * v);
}

double NGramLM::log_prob(const std::vector<std::string>& tokens,
                         std::size_t i) const {
  return std::log(cond_prob(tokens, i));
}

NGramLM train_lm(const std::vector<std::string>& corpus, std::size_t order,
                 double k) {
  if (corpus.empty()) throw std::invalid_argument("train_lm: empty corpus");
  std::set<std::string> types;
  std::vector<std::vector<std::string>> streams;
  for (const auto& text : corpus) {
    streams.push_back(normalize_tokens(text));
    for (const auto& t : streams.back()) types.insert(t);
  }
  NGramLM lm(order, k,
             std::vector<std::string>(types.begin(), types.end()));
  for (const auto& s : streams) lm.observe(s);
  return lm;
}

double perplexity(const Scorer& lm, const std::string& text) {
  const std::vector<std::string> tokens = normalize_tokens(text);
  if (tokens.empty())
    throw std::invalid_argument("perplexity: text has no tokens");
  double nll = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) nll -= lm.log_prob(tokens, i);
  return std::exp(nll / static_cast<double>(tokens.size()));
}

namespace {

GroupStats group_stats(const Scorer& lm, const std::vector<std::string>& texts) {
  GroupStats g;
  g.count = texts.size();
  std::vector<double> ppls;
  for (const auto& t : texts) ppls.push_back(perplexity(lm, t));
  double sum = 0.0;
  for (double p : ppls) sum += p;
  g.mean_ppl = sum / static_cast<double>(ppls.size());
  std::sort(ppls.begin(), ppls.end());
  const std::size_t n = ppls.size();
  g.median_ppl = n % 2 ? ppls[n / 2] : 0.5 * (ppls[n / 2 - 1] + ppls[n / 2]);
  return g;
}

}  // namespace

PerplexityReport verify_corpus(const Scorer& lm,
                               const std::vector<std::string>& originals,
                               const std::vector<std::string>& injected) {
  if (originals.empty() || injected.empty())
    throw std::invalid_argument("verify_corpus: both groups must be non-empty");
  PerplexityReport r;
  r.original = group_stats(lm, originals);
  r.injected = group_stats(lm, injected);
  r.delta = r.injected.mean_ppl - r.original.mean_ppl;
  return r;
}

std::string PerplexityReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  j.push_back({{"group", "original"},
               {"count", original.count},
               {"mean_ppl", original.mean_ppl},
               {"median_ppl", original.median_ppl}});
  j.push_back({{"group", "injected"},
               {"count", injected.count},
               {"mean_ppl", injected.mean_ppl},
               {"median_ppl", injected.median_ppl},
               {"delta", delta}});
  return j.dump(2);
}

}  // namespace chunkcheck
