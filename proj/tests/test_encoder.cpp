#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "chunkcheck/encoder.hpp"
#include "chunkcheck/tokenizer.hpp"

using namespace chunkcheck;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.ffn_dim = 16;
  cfg.max_positions = 8;
  cfg.vocab_size = 20;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("PAD invariance: masked token values never leak") {
  std::mt19937_64 rng(1);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);

  std::vector<int> chunk = {Vocab::kCls, 7, 9, Vocab::kPad, Vocab::kPad,
                            Vocab::kPad};
  std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0, 0};
  Tensor a = encode_chunk(w, chunk, mask, nullptr);

  std::vector<int> altered = {Vocab::kCls, 7, 9, 13, 5, 2};
  Tensor b = encode_chunk(w, altered, mask, nullptr);
  CHECK(a.data() == b.data());
}

TEST_CASE("all-PAD payload equals encoding of CLS alone") {
  std::mt19937_64 rng(2);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  std::vector<int> chunk = {Vocab::kCls, 11, 12, 4, 6, 3};
  std::vector<std::uint8_t> only_cls = {1, 0, 0, 0, 0, 0};
  Tensor padded = encode_chunk(w, chunk, only_cls, nullptr);
  Tensor alone = encode_chunk(w, {Vocab::kCls}, {1}, nullptr);
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(padded.data()[j] == doctest::Approx(alone.data()[j]).epsilon(1e-12));
}

TEST_CASE("determinism: identical chunks give identical outputs") {
  std::mt19937_64 rng(3);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  std::vector<int> chunk = {Vocab::kCls, 7, 9, 10, 11, 12};
  std::vector<std::uint8_t> mask(6, 1);
  Tensor a = encode_chunk(w, chunk, mask, nullptr);
  Tensor b = encode_chunk(w, chunk, mask, nullptr);
  CHECK(a.data() == b.data());
}

TEST_CASE("attention rows over unmasked keys sum to 1") {
  std::mt19937_64 rng(4);
  EncoderConfig cfg = tiny_config();
  EncoderWeights w = EncoderWeights::init(cfg, rng);
  Tensor x = Tensor::randn({6, 8}, 1.0, rng);
  std::vector<std::uint8_t> key_mask = {1, 1, 0, 1, 0, 1};
  AttentionResult res = multi_head_attention(x, w.layers[0].attn, cfg.heads,
                                             key_mask, 0.0, nullptr, nullptr);
  for (const auto& p : res.probs) {
    for (std::size_t i = 0; i < 6; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        if (!key_mask[j]) CHECK(p.at(i, j) == 0.0);
        row += p.at(i, j);
      }
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("token id >= vocab size rejected") {
  std::mt19937_64 rng(5);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  std::vector<std::uint8_t> mask = {1, 1};
  CHECK_THROWS_AS(encode_chunk(w, {Vocab::kCls, 25}, mask, nullptr),
                  ValueError);
}

TEST_CASE("encode_pair: empty chunks give zero rows, chunk independence") {
  std::mt19937_64 rng(6);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  ChunkPlan plan;
  plan.chunk_size = 6;
  plan.k_ctx = 4;
  plan.k_resp = 2;
  std::vector<int> ctx(12, 7), resp(3, 9);
  ChunkedPair pair = make_pair(ctx, resp, plan);
  PairEncoding reps = encode_pair(w, pair, nullptr);

  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double norm = 0;
    for (std::size_t j = 0; j < 8; ++j)
      norm += std::abs(reps.ctx_reps.at(i, j));
    if (norm > 0) ++nonzero;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    double norm = 0;
    for (std::size_t j = 0; j < 8; ++j)
      norm += std::abs(reps.resp_reps.at(i, j));
    if (norm > 0) ++nonzero;
  }
  // 12 ctx tokens / 5 payload = 3 chunks, 1 response chunk
  CHECK(nonzero == 4);

  // row i depends only on chunk i: re-encode with a different later chunk
  ChunkedPair pair2 = make_pair(std::vector<int>(17, 8), resp, plan);
  pair2.ctx.chunks[0] = pair.ctx.chunks[0];
  pair2.ctx.token_masks[0] = pair.ctx.token_masks[0];
  PairEncoding reps2 = encode_pair(w, pair2, nullptr);
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(reps.ctx_reps.at(0, j) == reps2.ctx_reps.at(0, j));
}

TEST_CASE("parallel chunk encoding matches serial bitwise") {
  std::mt19937_64 rng(7);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  ChunkPlan plan;
  plan.chunk_size = 6;
  plan.k_ctx = 4;
  plan.k_resp = 2;
  ChunkedPair pair = make_pair(std::vector<int>(19, 7), {9, 9, 9}, plan);
  ForwardOptions par;
  par.parallel_chunks = true;
  PairEncoding serial = encode_pair(w, pair, nullptr);
  PairEncoding parallel = encode_pair(w, pair, nullptr, par);
  CHECK(serial.ctx_reps.data() == parallel.ctx_reps.data());
  CHECK(serial.resp_reps.data() == parallel.resp_reps.data());
}

TEST_CASE("gradient check through encode_chunk") {
  std::mt19937_64 rng(8);
  EncoderWeights w = EncoderWeights::init(tiny_config(), rng);
  std::vector<int> chunk = {Vocab::kCls, 7, 9, 10, Vocab::kPad, Vocab::kPad};
  std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0, 0};
  for (auto& [name, param] : w.registry()) {
    double err = finite_difference_check(
        [&](Tape& t, const Tensor&) {
          return sum(encode_chunk(w, chunk, mask, &t), &t);
        },
        param, 1e-5);
    INFO(name);
    CHECK(err < 1e-4);
  }
}
