#include "chunkcheck/kernels.hpp"

#include <cstring>

namespace chunkcheck::kernels {

namespace {
// Below this many multiply-adds the OpenMP fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 64 * 64 * 64;
}  // namespace

void matmul_serial(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate) {
  if (m * k * n < kParallelThreshold || m < 2) {
    matmul_serial(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    if (!accumulate) std::memset(ci, 0, n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      if (accumulate)
        ci[j] += acc;
      else
        ci[j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  if (m * k * n < kParallelThreshold || m < 2) {
    matmul_nt_serial(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i)
    matmul_nt_serial(a + i * k, b, c + i * n, 1, k, n, accumulate);
}

void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  // Column-of-a parallelism would race on c; keep this one serial.
  matmul_tn_serial(a, b, c, m, k, n, accumulate);
}

}  // namespace chunkcheck::kernels
