#include "chunkcheck/model.hpp"

namespace chunkcheck {

void ModelConfig::validate() const {
  plan.validate();
  encoder.validate();
  aggregator.validate();
  if (encoder.max_positions < plan.chunk_size)
    throw std::invalid_argument(
        "ModelConfig: encoder max_positions below chunk size");
  if (aggregator.dim != encoder.dim)
    throw std::invalid_argument("ModelConfig: encoder/aggregator dim mismatch");
  if (aggregator.k_ctx != plan.k_ctx || aggregator.k_resp != plan.k_resp)
    throw std::invalid_argument("ModelConfig: aggregator slots != plan budgets");
}

void ModelConfig::sync() {
  if (encoder.max_positions < plan.chunk_size)
    encoder.max_positions = plan.chunk_size;
  aggregator.dim = encoder.dim;
  aggregator.k_ctx = plan.k_ctx;
  aggregator.k_resp = plan.k_resp;
}

Model Model::init(ModelConfig cfg, std::uint64_t seed) {
  cfg.sync();
  cfg.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.cfg = cfg;
  m.encoder = EncoderWeights::init(cfg.encoder, rng);
  m.aggregator = AggregatorWeights::init(cfg.aggregator, rng);
  return m;
}

std::vector<std::pair<std::string, Tensor>> Model::registry() const {
  std::vector<std::pair<std::string, Tensor>> r;
  for (auto& [name, t] : encoder.registry())
    r.emplace_back("encoder." + name, t);
  for (auto& [name, t] : aggregator.registry())
    r.emplace_back("aggregator." + name, t);
  return r;
}

Tensor Model::forward_logit(const ChunkedPair& pair, Tape* tape,
                            const ForwardOptions& opt,
                            Tensor* attention_out) const {
  PairEncoding reps = encode_pair(encoder, pair, tape, opt);
  return aggregate_logit(aggregator, reps.ctx_reps, reps.resp_reps,
                         pair.chunk_mask, tape, opt, attention_out);
}

AggregationOutput Model::score(const std::vector<int>& context_ids,
                               const std::vector<int>& response_ids,
                               bool parallel_chunks) const {
  ChunkedPair pair = make_pair(context_ids, response_ids, cfg.plan);
  ForwardOptions opt;
  opt.parallel_chunks = parallel_chunks;
  AggregationOutput out;
  Tensor logit = forward_logit(pair, nullptr, opt, &out.attention);
  out.logit = logit.item();
  out.probability = 1.0 / (1.0 + std::exp(-out.logit));
  return out;
}

}  // namespace chunkcheck
