#include "xaikit/matmul.hpp"

#include <cstring>
#include <vector>

#include "xaikit/threads.hpp"

// Deterministic by construction: every C element is produced by exactly one
// thread, accumulating in a fixed k order, so results do not depend on the
// thread count.

namespace xaikit {

namespace {

inline void scale_rows(std::size_t m, std::size_t n, double beta, double* c) {
  if (beta == 1.0) return;
  if (beta == 0.0) {
    std::memset(c, 0, m * n * sizeof(double));
    return;
  }
  for (std::size_t i = 0; i < m * n; ++i) c[i] *= beta;
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c) {
  apply_thread_cap();
  scale_rows(m, n, beta, c);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = alpha * arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c) {
  apply_thread_cap();
  scale_rows(m, n, beta, c);
  // k is blocked (serial outer loop) so each slice of B is read once per
  // thread instead of being re-streamed for every row of A. Each C element
  // still accumulates in a fixed order on a single thread.
  constexpr std::size_t kBlock = 256;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlock) {
    const std::size_t p1 = std::min(k, p0 + kBlock);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        // eight independent chains keep the FMA pipeline full; the summation
        // order is fixed, so results stay deterministic
        double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        std::size_t p = p0;
        for (; p + 8 <= p1; p += 8) {
          for (std::size_t u = 0; u < 8; ++u) acc[u] += arow[p + u] * brow[p + u];
        }
        for (; p < p1; ++p) acc[0] += arow[p] * brow[p];
        crow[j] += alpha * (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])));
      }
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, double alpha, const double* a, const double* b, double beta,
             double* c) {
  apply_thread_cap();
  scale_rows(m, n, beta, c);
  // Pack A^T once; the strided a[p*m + i] reads would otherwise miss cache on
  // every step of the inner accumulation.
  std::vector<double> at(m * k);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = arow[i];
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    double* crow = c + i * n;
    const double* arow = at.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = alpha * arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace xaikit
