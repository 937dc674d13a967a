#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chunkcheck/chunker.hpp"
#include "chunkcheck/tensor.hpp"

namespace chunkcheck {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t dim = 64;
  std::size_t ffn_dim = 256;
  std::size_t max_positions = 256;
  std::size_t vocab_size = 0;
  double dropout = 0.1;

  std::size_t head_dim() const { return dim / heads; }
  void validate() const;
};

// Shared multi-head attention sub-block. key_mask marks which positions may
// be attended to; rows (queries) are never masked.
struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttentionResult {
  Tensor out;                 // [m x d]
  std::vector<Tensor> probs;  // per-head [m x m] softmax weights
};

AttentionResult multi_head_attention(const Tensor& x,
                                     const AttentionParams& p,
                                     std::size_t heads,
                                     const std::vector<std::uint8_t>& key_mask,
                                     double dropout_rate, std::mt19937_64* rng,
                                     Tape* tape);

struct EncoderLayerWeights {
  AttentionParams attn;
  Tensor ln1_gain, ln1_bias;
  Tensor w1, b1, w2, b2;  // feed-forward
  Tensor ln2_gain, ln2_bias;
};

struct EncoderWeights {
  EncoderConfig cfg;
  Tensor tok_emb;  // [vocab x d]
  Tensor pos_emb;  // [max_positions x d]
  std::vector<EncoderLayerWeights> layers;
  Tensor final_gain, final_bias;

  static EncoderWeights init(const EncoderConfig& cfg, std::mt19937_64& rng);
  // Fixed tensor order; the checkpoint format and the optimizer rely on it.
  std::vector<std::pair<std::string, Tensor>> registry() const;
};

// Options threaded through the forward pass. rng must be set when
// dropout_rate > 0 (training mode).
struct ForwardOptions {
  double dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;
  bool parallel_chunks = false;  // OpenMP across chunks; inference only
};

// CLS vector of one chunk: [1 x d] after L pre-norm transformer layers.
Tensor encode_chunk(const EncoderWeights& w, const std::vector<int>& chunk,
                    const std::vector<std::uint8_t>& token_mask, Tape* tape,
                    const ForwardOptions& opt = {});

// Rows for empty chunks are zero vectors; each non-empty chunk is encoded
// independently.
struct PairEncoding {
  Tensor ctx_reps;   // [k_ctx x d]
  Tensor resp_reps;  // [k_resp x d]
};

PairEncoding encode_pair(const EncoderWeights& w, const ChunkedPair& pair,
                         Tape* tape, const ForwardOptions& opt = {});

}  // namespace chunkcheck
