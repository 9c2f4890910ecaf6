#pragma once

#include <cstddef>

namespace xaikit {

// C[m,n] = alpha * A[m,k] * B[k,n] + beta * C. Row-major, tight strides.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c);

// C[m,n] = alpha * A[m,k] * B[n,k]^T + beta * C.
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c);

// C[m,n] = alpha * A[k,m]^T * B[k,n] + beta * C.
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c);

}  // namespace xaikit
