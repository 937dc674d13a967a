#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Each has a serial reference
// implementation; the default entry points parallelize over output rows with
// OpenMP when the problem is large enough. Row-parallel loops keep a fixed
// per-element reduction order, so results are bitwise identical to serial.
namespace chunkcheck::kernels {

// c[m*n] = a[m*k] * b[k*n]; accumulate adds into c instead of overwriting.
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n, bool accumulate = false);
void matmul_serial(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate = false);

// c[m*n] = a[m*k] * b[n*k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate = false);

// c[m*n] = a[k*m]^T * b[k*n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate = false);

}  // namespace chunkcheck::kernels
