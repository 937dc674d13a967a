#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace chunkcheck {

// Chunk geometry: chunk size c plus per-side chunk budgets. Defaults follow
// the 32-context / 8-response split with 256-token chunks.
struct ChunkPlan {
  std::size_t chunk_size = 256;
  std::size_t k_ctx = 32;
  std::size_t k_resp = 8;

  std::size_t total_slots() const { return k_ctx + k_resp; }
  void validate() const;
};

struct ChunkedSide {
  // chunks[i] has length exactly chunk_size; position 0 is CLS.
  std::vector<std::vector<int>> chunks;
  // token_masks[i][j] == 1 for CLS and real payload tokens, 0 for PAD.
  std::vector<std::vector<std::uint8_t>> token_masks;
  std::size_t used_chunks = 0;
};

struct ChunkedPair {
  ChunkedSide ctx;
  ChunkedSide resp;
  // Context chunks first, then response chunks; true = non-empty.
  std::vector<std::uint8_t> chunk_mask;
};

// Greedy fill with payload capacity c-1 per chunk (slot 0 reserved for CLS);
// tokens beyond max_chunks * (c-1) are dropped from the tail.
ChunkedSide chunk_tokens(const std::vector<int>& tokens, std::size_t c,
                         std::size_t max_chunks);

ChunkedPair make_pair(const std::vector<int>& context_ids,
                      const std::vector<int>& response_ids,
                      const ChunkPlan& plan);

}  // namespace chunkcheck
