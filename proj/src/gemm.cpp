#include "tsr/gemm.hpp"

#include <cstring>
#include <vector>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define TSR_GEMM_AVX2 1
#endif

namespace tsr {

namespace {

thread_local std::vector<double> g_pack;
thread_local std::vector<double> g_trans;

#ifdef TSR_GEMM_AVX2

// 4x8 microkernel over a packed B panel (k x 8, contiguous).
inline void kernel_4x8(const double* a0, const double* a1, const double* a2, const double* a3,
                       const double* bp, std::int64_t k, double* c0, double* c1, double* c2,
                       double* c3, bool accumulate) {
  __m256d acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
  if (accumulate) {
    acc00 = _mm256_loadu_pd(c0);
    acc01 = _mm256_loadu_pd(c0 + 4);
    acc10 = _mm256_loadu_pd(c1);
    acc11 = _mm256_loadu_pd(c1 + 4);
    acc20 = _mm256_loadu_pd(c2);
    acc21 = _mm256_loadu_pd(c2 + 4);
    acc30 = _mm256_loadu_pd(c3);
    acc31 = _mm256_loadu_pd(c3 + 4);
  } else {
    acc00 = acc01 = acc10 = acc11 = acc20 = acc21 = acc30 = acc31 = _mm256_setzero_pd();
  }
  for (std::int64_t t = 0; t < k; ++t) {
    const __m256d b0 = _mm256_loadu_pd(bp + t * 8);
    const __m256d b1 = _mm256_loadu_pd(bp + t * 8 + 4);
    const __m256d va0 = _mm256_set1_pd(a0[t]);
    acc00 = _mm256_fmadd_pd(va0, b0, acc00);
    acc01 = _mm256_fmadd_pd(va0, b1, acc01);
    const __m256d va1 = _mm256_set1_pd(a1[t]);
    acc10 = _mm256_fmadd_pd(va1, b0, acc10);
    acc11 = _mm256_fmadd_pd(va1, b1, acc11);
    const __m256d va2 = _mm256_set1_pd(a2[t]);
    acc20 = _mm256_fmadd_pd(va2, b0, acc20);
    acc21 = _mm256_fmadd_pd(va2, b1, acc21);
    const __m256d va3 = _mm256_set1_pd(a3[t]);
    acc30 = _mm256_fmadd_pd(va3, b0, acc30);
    acc31 = _mm256_fmadd_pd(va3, b1, acc31);
  }
  _mm256_storeu_pd(c0, acc00);
  _mm256_storeu_pd(c0 + 4, acc01);
  _mm256_storeu_pd(c1, acc10);
  _mm256_storeu_pd(c1 + 4, acc11);
  _mm256_storeu_pd(c2, acc20);
  _mm256_storeu_pd(c2 + 4, acc21);
  _mm256_storeu_pd(c3, acc30);
  _mm256_storeu_pd(c3 + 4, acc31);
}

#endif  // TSR_GEMM_AVX2

inline void kernel_generic(const double* a, const double* b, double* c, std::int64_t rows,
                           std::int64_t k, std::int64_t cols, std::int64_t lda, std::int64_t ldb,
                           std::int64_t ldc, bool accumulate) {
  for (std::int64_t i = 0; i < rows; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate) {
      for (std::int64_t j = 0; j < cols; ++j) crow[j] = 0.0;
    }
    const double* arow = a + i * lda;
    for (std::int64_t t = 0; t < k; ++t) {
      const double av = arow[t];
      const double* brow = b + t * ldb;
      for (std::int64_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
#ifdef TSR_GEMM_AVX2
  const std::int64_t n8 = n - (n % 8);
  if (n8 > 0 && m >= 4) {
    if (g_pack.size() < static_cast<std::size_t>(k * 8)) g_pack.resize(static_cast<std::size_t>(k * 8));
    double* bp = g_pack.data();
    for (std::int64_t j0 = 0; j0 < n8; j0 += 8) {
      for (std::int64_t t = 0; t < k; ++t) {
        std::memcpy(bp + t * 8, b + t * n + j0, 8 * sizeof(double));
      }
      const std::int64_t m4 = m - (m % 4);
      for (std::int64_t i0 = 0; i0 < m4; i0 += 4) {
        kernel_4x8(a + i0 * k, a + (i0 + 1) * k, a + (i0 + 2) * k, a + (i0 + 3) * k, bp, k,
                   c + i0 * n + j0, c + (i0 + 1) * n + j0, c + (i0 + 2) * n + j0,
                   c + (i0 + 3) * n + j0, accumulate);
      }
      if (m4 < m) {
        kernel_generic(a + m4 * k, bp, c + m4 * n + j0, m - m4, k, 8, k, 8, n, accumulate);
      }
    }
    if (n8 < n) {
      kernel_generic(a, b + n8, c + n8, m, k, n - n8, k, n, n, accumulate);
    }
    return;
  }
#endif
  kernel_generic(a, b, c, m, k, n, k, n, n, accumulate);
}

void gemm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
#ifdef TSR_GEMM_AVX2
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::int64_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      const double* b0 = b + j * k;
      const double* b1 = b + (j + 1) * k;
      const double* b2 = b + (j + 2) * k;
      const double* b3 = b + (j + 3) * k;
      std::int64_t t = 0;
      for (; t + 4 <= k; t += 4) {
        const __m256d av = _mm256_loadu_pd(arow + t);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + t), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + t), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + t), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + t), s3);
      }
      // Horizontal sums; lane order is fixed so results are reproducible.
      alignas(32) double buf[4];
      double d0, d1, d2, d3;
      _mm256_store_pd(buf, s0);
      d0 = (buf[0] + buf[1]) + (buf[2] + buf[3]);
      _mm256_store_pd(buf, s1);
      d1 = (buf[0] + buf[1]) + (buf[2] + buf[3]);
      _mm256_store_pd(buf, s2);
      d2 = (buf[0] + buf[1]) + (buf[2] + buf[3]);
      _mm256_store_pd(buf, s3);
      d3 = (buf[0] + buf[1]) + (buf[2] + buf[3]);
      for (; t < k; ++t) {
        d0 += arow[t] * b0[t];
        d1 += arow[t] * b1[t];
        d2 += arow[t] * b2[t];
        d3 += arow[t] * b3[t];
      }
      if (accumulate) {
        crow[j] += d0;
        crow[j + 1] += d1;
        crow[j + 2] += d2;
        crow[j + 3] += d3;
      } else {
        crow[j] = d0;
        crow[j + 1] = d1;
        crow[j + 2] = d2;
        crow[j + 3] = d3;
      }
    }
    for (; j < n; ++j) {
      const double* brow = b + j * k;
      double d = 0.0;
      for (std::int64_t t = 0; t < k; ++t) d += arow[t] * brow[t];
      if (accumulate) {
        crow[j] += d;
      } else {
        crow[j] = d;
      }
    }
  }
#else
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double d = 0.0;
      for (std::int64_t t = 0; t < k; ++t) d += arow[t] * brow[t];
      if (accumulate) {
        crow[j] += d;
      } else {
        crow[j] = d;
      }
    }
  }
#endif
}

void gemm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
  // A is [k x m]; transpose into scratch first so the fast NN path applies.
  if (g_trans.size() < static_cast<std::size_t>(m * k)) {
    g_trans.resize(static_cast<std::size_t>(m * k));
  }
  double* at = g_trans.data();
  for (std::int64_t t = 0; t < k; ++t) {
    const double* arow = a + t * m;
    for (std::int64_t i = 0; i < m; ++i) at[i * k + t] = arow[i];
  }
  gemm_nn(at, b, c, m, k, n, accumulate);
}

}  // namespace tsr
