#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "chunkcheck/aggregator.hpp"
#include "chunkcheck/chunker.hpp"
#include "chunkcheck/encoder.hpp"
#include "chunkcheck/tensor.hpp"

namespace chunkcheck {

struct ModelConfig {
  ChunkPlan plan;
  EncoderConfig encoder;
  AggregatorConfig aggregator;

  void validate() const;
  // Keeps encoder/aggregator geometry consistent with the plan.
  void sync();
};

struct Model {
  ModelConfig cfg;
  EncoderWeights encoder;
  AggregatorWeights aggregator;

  static Model init(ModelConfig cfg, std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor>> registry() const;

  Tensor forward_logit(const ChunkedPair& pair, Tape* tape,
                       const ForwardOptions& opt = {},
                       Tensor* attention_out = nullptr) const;
  AggregationOutput score(const std::vector<int>& context_ids,
                          const std::vector<int>& response_ids,
                          bool parallel_chunks = false) const;
};

}  // namespace chunkcheck
