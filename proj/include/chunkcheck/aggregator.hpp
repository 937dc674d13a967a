#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chunkcheck/chunker.hpp"
#include "chunkcheck/encoder.hpp"
#include "chunkcheck/tensor.hpp"

namespace chunkcheck {

struct AggregatorConfig {
  std::size_t dim = 64;
  std::size_t heads = 2;
  std::size_t k_ctx = 32;
  std::size_t k_resp = 8;
  double dropout = 0.1;
  bool mean_pool = false;     // ablation: mean over unmasked slots
  bool attention_ffn = false; // ablation: add a feed-forward sublayer

  std::size_t num_slots() const { return k_ctx + k_resp + 2; }
  void validate() const;
};

struct AggregatorWeights {
  AggregatorConfig cfg;
  Tensor cls_emb;      // [1 x d] pooled-slot embedding
  Tensor sep_emb;      // [1 x d] context/response separator
  Tensor slot_pos;     // [(k_ctx + k_resp + 2) x d]
  Tensor seg_ctx, seg_resp, seg_special;  // each [1 x d]
  AttentionParams attn;
  Tensor ln_gain, ln_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2, ln2_gain, ln2_bias;  // attention_ffn
  Tensor head_w;  // [d x 1]
  Tensor head_b;  // [1]

  static AggregatorWeights init(const AggregatorConfig& cfg,
                                std::mt19937_64& rng);
  std::vector<std::pair<std::string, Tensor>> registry() const;
};

struct AggregationOutput {
  double logit = 0.0;
  double probability = 0.0;
  Tensor attention;  // [(k+2) x (k+2)], head-averaged, for inspection
};

// Differentiable path: returns the scalar logit tensor. attention_out, when
// non-null, receives the head-averaged attention weights.
Tensor aggregate_logit(const AggregatorWeights& w, const Tensor& ctx_reps,
                       const Tensor& resp_reps,
                       const std::vector<std::uint8_t>& chunk_mask, Tape* tape,
                       const ForwardOptions& opt = {},
                       Tensor* attention_out = nullptr);

AggregationOutput aggregate(const AggregatorWeights& w, const Tensor& ctx_reps,
                            const Tensor& resp_reps,
                            const std::vector<std::uint8_t>& chunk_mask);

enum class Label { kFaithful = 0, kHallucinated = 1 };

// hallucinated iff probability >= threshold
Label predict(const AggregationOutput& out, double threshold = 0.5);

}  // namespace chunkcheck
