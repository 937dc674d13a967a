#include "chunkcheck/chunker.hpp"

#include <algorithm>

#include "chunkcheck/tokenizer.hpp"

namespace chunkcheck {

void ChunkPlan::validate() const {
  if (chunk_size < 4)
    throw std::invalid_argument("ChunkPlan: chunk_size must be >= 4");
  if (k_ctx < 1 || k_resp < 1)
    throw std::invalid_argument("ChunkPlan: chunk budgets must be >= 1");
  if (k_ctx + k_resp > 512)
    throw std::invalid_argument(
        "ChunkPlan: k_ctx + k_resp exceeds the 512-slot aggregation capacity");
}

ChunkedSide chunk_tokens(const std::vector<int>& tokens, std::size_t c,
                         std::size_t max_chunks) {
  if (c < 4) throw std::invalid_argument("chunk_tokens: chunk size must be >= 4");
  const std::size_t payload = c - 1;
  const std::size_t kept = std::min(tokens.size(), max_chunks * payload);
  const std::size_t used = (kept + payload - 1) / payload;

  ChunkedSide side;
  side.used_chunks = used;
  side.chunks.assign(max_chunks, std::vector<int>(c, Vocab::kPad));
  side.token_masks.assign(max_chunks, std::vector<std::uint8_t>(c, 0));
  for (std::size_t i = 0; i < max_chunks; ++i) {
    side.chunks[i][0] = Vocab::kCls;
    side.token_masks[i][0] = 1;
    const std::size_t begin = i * payload;
    if (begin >= kept) continue;
    const std::size_t n = std::min(payload, kept - begin);
    for (std::size_t j = 0; j < n; ++j) {
      side.chunks[i][j + 1] = tokens[begin + j];
      side.token_masks[i][j + 1] = 1;
    }
  }
  return side;
}

ChunkedPair make_pair(const std::vector<int>& context_ids,
                      const std::vector<int>& response_ids,
                      const ChunkPlan& plan) {
  plan.validate();
  if (response_ids.empty())
    throw std::invalid_argument("make_pair: response must be non-empty");
  ChunkedPair pair;
  pair.ctx = chunk_tokens(context_ids, plan.chunk_size, plan.k_ctx);
  pair.resp = chunk_tokens(response_ids, plan.chunk_size, plan.k_resp);
  pair.chunk_mask.assign(plan.total_slots(), 0);
  for (std::size_t i = 0; i < pair.ctx.used_chunks; ++i) pair.chunk_mask[i] = 1;
  for (std::size_t i = 0; i < pair.resp.used_chunks; ++i)
    pair.chunk_mask[plan.k_ctx + i] = 1;
  return pair;
}

}  // namespace chunkcheck
