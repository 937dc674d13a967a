#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "chunkcheck/encoder.hpp"
#include "chunkcheck/kernels.hpp"

using namespace chunkcheck;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(F&& f, int reps) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_seconds();
    f();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void kernel_bench() {
  std::printf("matmul kernels, serial vs OpenMP (best of 3)\n");
  std::mt19937_64 rng(1);
  for (std::size_t n : {64, 128, 256, 512}) {
    Tensor a = Tensor::randn({n, n}, 1.0, rng);
    Tensor b = Tensor::randn({n, n}, 1.0, rng);
    std::vector<double> out(n * n);
    const double serial = time_best_of(
        [&] {
          kernels::matmul_serial(a.data().data(), b.data().data(), out.data(), n, n, n,
                        false);
        },
        3);
    const double parallel = time_best_of(
        [&] {
          kernels::matmul(a.data().data(), b.data().data(), out.data(), n, n, n,
                 false);
        },
        3);
    std::printf("  %4zu x %-4zu  serial %8.4f ms  parallel %8.4f ms  (x%.2f)\n",
                n, n, serial * 1e3, parallel * 1e3, serial / parallel);
  }
}

EncoderWeights make_encoder(std::size_t max_positions, std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dim = 64;
  cfg.ffn_dim = 128;
  cfg.max_positions = max_positions;
  cfg.vocab_size = 100;
  cfg.dropout = 0.0;
  std::mt19937_64 rng(seed);
  return EncoderWeights::init(cfg, rng);
}

double time_chunked(std::size_t n, std::size_t c, int reps) {
  const std::size_t k = n / (c - 1) + 1;
  ChunkPlan plan{c, k, 1};
  std::mt19937_64 rng(2);
  std::vector<int> ctx(n), resp(c / 2);
  for (auto& t : ctx) t = 5 + static_cast<int>(rng() % 95);
  for (auto& t : resp) t = 5 + static_cast<int>(rng() % 95);
  ChunkedPair pair = make_pair(ctx, resp, plan);
  EncoderWeights w = make_encoder(c, 3);
  return time_best_of([&] { encode_pair(w, pair, nullptr); }, reps);
}

double time_full(std::size_t n, int reps) {
  EncoderWeights w = make_encoder(n, 3);
  std::mt19937_64 rng(2);
  std::vector<int> tokens(n);
  std::vector<std::uint8_t> mask(n, 1);
  tokens[0] = 2;
  for (std::size_t i = 1; i < n; ++i)
    tokens[i] = 5 + static_cast<int>(rng() % 95);
  return time_best_of([&] { encode_chunk(w, tokens, mask, nullptr); }, reps);
}

void complexity_bench() {
  const std::size_t n = 8192, c = 256;
  std::printf("\nchunked vs full self-attention, n=%zu tokens, d=64, L=2\n", n);
  const double chunked = time_chunked(n, c, 3);
  const double full = time_full(n, 1);
  std::printf("  chunked (c=%zu)   %8.1f ms\n", c, chunked * 1e3);
  std::printf("  full attention   %8.1f ms\n", full * 1e3);
  std::printf("  speedup          %8.2fx\n", full / chunked);

  std::printf("\nscaling with the number of real chunks (c=%zu)\n", c);
  const std::size_t half = (c - 1) * 16, dbl = (c - 1) * 32;
  const double t16 = time_chunked(half, c, 3);
  const double t32 = time_chunked(dbl, c, 3);
  std::printf("  16 chunks  %8.1f ms\n", t16 * 1e3);
  std::printf("  32 chunks  %8.1f ms  (ratio %.2f)\n", t32 * 1e3, t32 / t16);
}

}  // namespace

int main() {
  kernel_bench();
  complexity_bench();
  return 0;
}
