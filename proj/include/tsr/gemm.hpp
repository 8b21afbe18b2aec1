#ifndef TSR_GEMM_HPP
#define TSR_GEMM_HPP

#include <cstdint>

namespace tsr {

// Row-major f64 matrix kernels. When `accumulate` is false C is overwritten,
// otherwise the product is added into it. Results are identical for every
// thread count because these kernels are single-threaded by design; callers
// parallelize across independent jobs, never inside an op.

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate);

// C[m x n] (+)= A[k x m]^T * B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate);

}  // namespace tsr

#endif
