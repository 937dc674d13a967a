#include "chunkcheck/aggregator.hpp"

#include <cmath>
#include <stdexcept>

namespace chunkcheck {

void AggregatorConfig::validate() const {
  if (dim == 0 || heads == 0)
    throw std::invalid_argument("AggregatorConfig: dim/heads must be > 0");
  if (dim % heads != 0)
    throw std::invalid_argument("AggregatorConfig: dim must be divisible by heads");
  if (k_ctx < 1 || k_resp < 1)
    throw std::invalid_argument("AggregatorConfig: chunk budgets must be >= 1");
}

namespace {

constexpr double kLnEps = 1e-5;

// Fan-in-scaled init, matching the encoder: projections by 1/sqrt(rows),
// embedding-like rows (added to the width-c stream) by 1/sqrt(cols).
Tensor mat(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(r));
  return Tensor::randn({r, c}, std, rng, true);
}

Tensor emb(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(c));
  return Tensor::randn({r, c}, std, rng, true);
}

}  // namespace

AggregatorWeights AggregatorWeights::init(const AggregatorConfig& cfg,
                                          std::mt19937_64& rng) {
  cfg.validate();
  AggregatorWeights w;
  w.cfg = cfg;
  const std::size_t d = cfg.dim;
  w.cls_emb = emb(1, d, rng);
  w.sep_emb = emb(1, d, rng);
  w.slot_pos = emb(cfg.num_slots(), d, rng);
  w.seg_ctx = emb(1, d, rng);
  w.seg_resp = emb(1, d, rng);
  w.seg_special = emb(1, d, rng);
  w.attn.wq = mat(d, d, rng);
  w.attn.bq = Tensor::zeros({d}, true);
  w.attn.wk = mat(d, d, rng);
  w.attn.bk = Tensor::zeros({d}, true);
  w.attn.wv = mat(d, d, rng);
  w.attn.bv = Tensor::zeros({d}, true);
  w.attn.wo = mat(d, d, rng);
  w.attn.bo = Tensor::zeros({d}, true);
  w.ln_gain = Tensor::full({d}, 1.0);
  w.ln_gain.set_requires_grad(true);
  w.ln_bias = Tensor::zeros({d}, true);
  if (cfg.attention_ffn) {
    w.ffn_w1 = mat(d, 4 * d, rng);
    w.ffn_b1 = Tensor::zeros({4 * d}, true);
    w.ffn_w2 = mat(4 * d, d, rng);
    w.ffn_b2 = Tensor::zeros({d}, true);
    w.ln2_gain = Tensor::full({d}, 1.0);
    w.ln2_gain.set_requires_grad(true);
    w.ln2_bias = Tensor::zeros({d}, true);
  }
  w.head_w = mat(d, 1, rng);
  w.head_b = Tensor::zeros({1}, true);
  return w;
}

std::vector<std::pair<std::string, Tensor>> AggregatorWeights::registry()
    const {
  std::vector<std::pair<std::string, Tensor>> r;
  r.emplace_back("cls_emb", cls_emb);
  r.emplace_back("sep_emb", sep_emb);
  r.emplace_back("slot_pos", slot_pos);
  r.emplace_back("seg_ctx", seg_ctx);
  r.emplace_back("seg_resp", seg_resp);
  r.emplace_back("seg_special", seg_special);
  r.emplace_back("wq", attn.wq);
  r.emplace_back("bq", attn.bq);
  r.emplace_back("wk", attn.wk);
  r.emplace_back("bk", attn.bk);
  r.emplace_back("wv", attn.wv);
  r.emplace_back("bv", attn.bv);
  r.emplace_back("wo", attn.wo);
  r.emplace_back("bo", attn.bo);
  r.emplace_back("ln_gain", ln_gain);
  r.emplace_back("ln_bias", ln_bias);
  if (cfg.attention_ffn) {
    r.emplace_back("ffn_w1", ffn_w1);
    r.emplace_back("ffn_b1", ffn_b1);
    r.emplace_back("ffn_w2", ffn_w2);
    r.emplace_back("ffn_b2", ffn_b2);
    r.emplace_back("ln2_gain", ln2_gain);
    r.emplace_back("ln2_bias", ln2_bias);
  }
  r.emplace_back("head_w", head_w);
  r.emplace_back("head_b", head_b);
  return r;
}

Tensor aggregate_logit(const AggregatorWeights& w, const Tensor& ctx_reps,
                       const Tensor& resp_reps,
                       const std::vector<std::uint8_t>& chunk_mask, Tape* tape,
                       const ForwardOptions& opt, Tensor* attention_out) {
  const auto& cfg = w.cfg;
  const std::size_t d = cfg.dim;
  if (ctx_reps.cols() != d || resp_reps.cols() != d)
    throw ShapeError("aggregate: representation dim does not match " +
                     std::to_string(d));
  if (ctx_reps.rows() != cfg.k_ctx || resp_reps.rows() != cfg.k_resp)
    throw ShapeError("aggregate: chunk counts do not match the plan");
  if (chunk_mask.size() != cfg.k_ctx + cfg.k_resp)
    throw ShapeError("aggregate: chunk_mask length mismatch");
  bool any = false;
  for (auto b : chunk_mask) any |= b != 0;
  if (!any) throw ValueError("aggregate: all chunks masked, nothing to classify");

  // [globalCLS, ctx..., SEP, resp...] with slot position + segment embeddings
  Tensor base = concat_rows({w.cls_emb, ctx_reps, w.sep_emb, resp_reps}, tape);
  std::vector<Tensor> seg_rows;
  seg_rows.push_back(w.seg_special);
  for (std::size_t i = 0; i < cfg.k_ctx; ++i) seg_rows.push_back(w.seg_ctx);
  seg_rows.push_back(w.seg_special);
  for (std::size_t i = 0; i < cfg.k_resp; ++i) seg_rows.push_back(w.seg_resp);
  Tensor x = add(add(base, w.slot_pos, tape), concat_rows(seg_rows, tape), tape);

  // globalCLS and SEP stay unmasked
  std::vector<std::uint8_t> slot_mask(cfg.num_slots(), 0);
  slot_mask[0] = 1;
  slot_mask[cfg.k_ctx + 1] = 1;
  for (std::size_t i = 0; i < cfg.k_ctx; ++i) slot_mask[1 + i] = chunk_mask[i];
  for (std::size_t i = 0; i < cfg.k_resp; ++i)
    slot_mask[cfg.k_ctx + 2 + i] = chunk_mask[cfg.k_ctx + i];

  AttentionResult attn = multi_head_attention(
      x, w.attn, cfg.heads, slot_mask, opt.dropout_rate, opt.rng, tape);
  if (attention_out) {
    const std::size_t m = cfg.num_slots();
    Tensor avg = Tensor::zeros({m, m});
    for (const auto& p : attn.probs)
      for (std::size_t i = 0; i < m * m; ++i)
        avg.data()[i] += p.data()[i] / static_cast<double>(attn.probs.size());
    *attention_out = avg;
  }
  Tensor residual = opt.dropout_rate > 0.0 && opt.rng
                        ? dropout(attn.out, opt.dropout_rate, *opt.rng, tape)
                        : attn.out;
  x = layer_norm(add(x, residual, tape), w.ln_gain, w.ln_bias, kLnEps, tape);
  if (cfg.attention_ffn) {
    Tensor h = gelu(add_rowvec(matmul(x, w.ffn_w1, tape), w.ffn_b1, tape), tape);
    Tensor f = add_rowvec(matmul(h, w.ffn_w2, tape), w.ffn_b2, tape);
    x = layer_norm(add(x, f, tape), w.ln2_gain, w.ln2_bias, kLnEps, tape);
  }

  Tensor pooled;
  if (cfg.mean_pool) {
    std::size_t n_on = 0;
    for (auto b : slot_mask) n_on += b;
    std::vector<Tensor> rows;
    for (std::size_t i = 0; i < slot_mask.size(); ++i)
      if (slot_mask[i]) rows.push_back(slice_rows(x, i, 1, tape));
    Tensor stacked = concat_rows(rows, tape);
    Tensor onesRow = Tensor::full({1, rows.size()}, 1.0 / double(n_on));
    pooled = matmul(onesRow, stacked, tape);
  } else {
    pooled = slice_rows(x, 0, 1, tape);
  }
  Tensor logit = add_rowvec(matmul(pooled, w.head_w, tape), w.head_b, tape);
  return logit;
}

AggregationOutput aggregate(const AggregatorWeights& w, const Tensor& ctx_reps,
                            const Tensor& resp_reps,
                            const std::vector<std::uint8_t>& chunk_mask) {
  AggregationOutput out;
  Tensor logit = aggregate_logit(w, ctx_reps, resp_reps, chunk_mask, nullptr,
                                 {}, &out.attention);
  out.logit = logit.item();
  out.probability = 1.0 / (1.0 + std::exp(-out.logit));
  return out;
}

Label predict(const AggregationOutput& out, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("predict: threshold must be in (0,1)");
  return out.probability >= threshold ? Label::kHallucinated : Label::kFaithful;
}

}  // namespace chunkcheck
