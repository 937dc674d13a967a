#include "chunkcheck/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace chunkcheck {

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || layers == 0)
    throw std::invalid_argument("EncoderConfig: dim/heads/layers must be > 0");
  if (dim % heads != 0)
    throw std::invalid_argument("EncoderConfig: dim must be divisible by heads");
  if (vocab_size == 0)
    throw std::invalid_argument("EncoderConfig: vocab_size not set");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("EncoderConfig: dropout must be in [0,1)");
}

namespace {

// Fan-in-scaled init: a fixed BERT-style std (0.02) leaves narrow models with
// a per-projection gain of 0.02*sqrt(d), which at small d collapses the
// example-dependent signal to ~0 at the logit and stalls from-scratch training.
Tensor mat(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(r));
  return Tensor::randn({r, c}, std, rng, /*requires_grad=*/true);
}

// Embedding rows are added to the width-c residual stream, so scale by the
// stream width rather than the table height.
Tensor emb(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(c));
  return Tensor::randn({r, c}, std, rng, /*requires_grad=*/true);
}

Tensor zero_vec(std::size_t n) { return Tensor::zeros({n}, true); }

Tensor ones_vec(std::size_t n) {
  Tensor t = Tensor::full({n}, 1.0);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

EncoderWeights EncoderWeights::init(const EncoderConfig& cfg,
                                    std::mt19937_64& rng) {
  cfg.validate();
  EncoderWeights w;
  w.cfg = cfg;
  w.tok_emb = emb(cfg.vocab_size, cfg.dim, rng);
  w.pos_emb = emb(cfg.max_positions, cfg.dim, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayerWeights lw;
    lw.attn.wq = mat(cfg.dim, cfg.dim, rng);
    lw.attn.bq = zero_vec(cfg.dim);
    lw.attn.wk = mat(cfg.dim, cfg.dim, rng);
    lw.attn.bk = zero_vec(cfg.dim);
    lw.attn.wv = mat(cfg.dim, cfg.dim, rng);
    lw.attn.bv = zero_vec(cfg.dim);
    lw.attn.wo = mat(cfg.dim, cfg.dim, rng);
    lw.attn.bo = zero_vec(cfg.dim);
    lw.ln1_gain = ones_vec(cfg.dim);
    lw.ln1_bias = zero_vec(cfg.dim);
    lw.w1 = mat(cfg.dim, cfg.ffn_dim, rng);
    lw.b1 = zero_vec(cfg.ffn_dim);
    lw.w2 = mat(cfg.ffn_dim, cfg.dim, rng);
    lw.b2 = zero_vec(cfg.dim);
    lw.ln2_gain = ones_vec(cfg.dim);
    lw.ln2_bias = zero_vec(cfg.dim);
    w.layers.push_back(std::move(lw));
  }
  w.final_gain = ones_vec(cfg.dim);
  w.final_bias = zero_vec(cfg.dim);
  return w;
}

std::vector<std::pair<std::string, Tensor>> EncoderWeights::registry() const {
  std::vector<std::pair<std::string, Tensor>> r;
  r.emplace_back("tok_emb", tok_emb);
  r.emplace_back("pos_emb", pos_emb);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lw = layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    r.emplace_back(p + "wq", lw.attn.wq);
    r.emplace_back(p + "bq", lw.attn.bq);
    r.emplace_back(p + "wk", lw.attn.wk);
    r.emplace_back(p + "bk", lw.attn.bk);
    r.emplace_back(p + "wv", lw.attn.wv);
    r.emplace_back(p + "bv", lw.attn.bv);
    r.emplace_back(p + "wo", lw.attn.wo);
    r.emplace_back(p + "bo", lw.attn.bo);
    r.emplace_back(p + "ln1_gain", lw.ln1_gain);
    r.emplace_back(p + "ln1_bias", lw.ln1_bias);
    r.emplace_back(p + "w1", lw.w1);
    r.emplace_back(p + "b1", lw.b1);
    r.emplace_back(p + "w2", lw.w2);
    r.emplace_back(p + "b2", lw.b2);
    r.emplace_back(p + "ln2_gain", lw.ln2_gain);
    r.emplace_back(p + "ln2_bias", lw.ln2_bias);
  }
  r.emplace_back("final_gain", final_gain);
  r.emplace_back("final_bias", final_bias);
  return r;
}

AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& p,
                                     std::size_t heads,
                                     const std::vector<std::uint8_t>& key_mask,
                                     double dropout_rate, std::mt19937_64* rng,
                                     Tape* tape) {
  const std::size_t m = x.rows(), d = x.cols();
  if (key_mask.size() != m)
    throw std::invalid_argument("attention: key_mask length != sequence length");
  const std::size_t hd = d / heads;

  Tensor q = add_rowvec(matmul(x, p.wq, tape), p.bq, tape);
  Tensor k = add_rowvec(matmul(x, p.wk, tape), p.bk, tape);
  Tensor v = add_rowvec(matmul(x, p.wv, tape), p.bv, tape);

  Tensor mask = Tensor::zeros({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      mask.at(i, j) = key_mask[j] ? 1.0 : 0.0;

  AttentionResult res;
  std::vector<Tensor> head_ctx;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * hd, hd, tape);
    Tensor kh = slice_cols(k, h * hd, hd, tape);
    Tensor vh = slice_cols(v, h * hd, hd, tape);
    Tensor scores = scale(matmul_nt(qh, kh, tape),
                          1.0 / std::sqrt(static_cast<double>(hd)), tape);
    Tensor probs = softmax_rows(scores, &mask, tape);
    res.probs.push_back(probs);
    Tensor applied = probs;
    if (dropout_rate > 0.0) {
      if (!rng)
        throw std::invalid_argument("attention: dropout requires an rng");
      applied = dropout(probs, dropout_rate, *rng, tape);
    }
    head_ctx.push_back(matmul(applied, vh, tape));
  }
  Tensor cat = heads == 1 ? head_ctx[0] : concat_cols(head_ctx, tape);
  res.out = add_rowvec(matmul(cat, p.wo, tape), p.bo, tape);
  return res;
}

namespace {

Tensor feed_forward(const Tensor& x, const EncoderLayerWeights& lw,
                    Tape* tape) {
  Tensor h = gelu(add_rowvec(matmul(x, lw.w1, tape), lw.b1, tape), tape);
  return add_rowvec(matmul(h, lw.w2, tape), lw.b2, tape);
}

Tensor maybe_dropout(const Tensor& x, const ForwardOptions& opt, Tape* tape) {
  if (opt.dropout_rate <= 0.0) return x;
  if (!opt.rng)
    throw std::invalid_argument("encoder: dropout requires an rng");
  return dropout(x, opt.dropout_rate, *opt.rng, tape);
}

}  // namespace

Tensor encode_chunk(const EncoderWeights& w, const std::vector<int>& chunk,
                    const std::vector<std::uint8_t>& token_mask, Tape* tape,
                    const ForwardOptions& opt) {
  const std::size_t c = chunk.size();
  if (token_mask.size() != c)
    throw std::invalid_argument("encode_chunk: mask length != chunk length");
  if (c > w.cfg.max_positions)
    throw std::invalid_argument("encode_chunk: chunk longer than max_positions");

  Tensor x = add(embedding(w.tok_emb, chunk, tape),
                 slice_rows(w.pos_emb, 0, c, tape), tape);
  constexpr double kLnEps = 1e-5;
  for (const auto& lw : w.layers) {
    Tensor h = layer_norm(x, lw.ln1_gain, lw.ln1_bias, kLnEps, tape);
    AttentionResult attn = multi_head_attention(
        h, lw.attn, w.cfg.heads, token_mask, opt.dropout_rate, opt.rng, tape);
    x = add(x, maybe_dropout(attn.out, opt, tape), tape);
    Tensor h2 = layer_norm(x, lw.ln2_gain, lw.ln2_bias, kLnEps, tape);
    x = add(x, maybe_dropout(feed_forward(h2, lw, tape), opt, tape), tape);
  }
  x = layer_norm(x, w.final_gain, w.final_bias, kLnEps, tape);
  return slice_rows(x, 0, 1, tape);
}

namespace {

Tensor encode_side(const EncoderWeights& w, const ChunkedSide& side,
                   Tape* tape, const ForwardOptions& opt) {
  const std::size_t k = side.chunks.size();
  std::vector<Tensor> rows(k);
  const bool parallel = opt.parallel_chunks && tape == nullptr;
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < k; ++i)
      rows[i] = i < side.used_chunks
                    ? encode_chunk(w, side.chunks[i], side.token_masks[i],
                                   nullptr, opt)
                    : Tensor::zeros({1, w.cfg.dim});
  } else {
    for (std::size_t i = 0; i < k; ++i)
      rows[i] = i < side.used_chunks
                    ? encode_chunk(w, side.chunks[i], side.token_masks[i],
                                   tape, opt)
                    : Tensor::zeros({1, w.cfg.dim});
  }
  return concat_rows(rows, tape);
}

}  // namespace

PairEncoding encode_pair(const EncoderWeights& w, const ChunkedPair& pair,
                         Tape* tape, const ForwardOptions& opt) {
  PairEncoding out;
  out.ctx_reps = encode_side(w, pair.ctx, tape, opt);
  out.resp_reps = encode_side(w, pair.resp, tape, opt);
  return out;
}

}  // namespace chunkcheck
