#pragma once

namespace direcnet::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C, op(X) = X or X^T.
// A is M x K after op, B is K x N after op.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

// Pins the BLAS backend to one thread so reductions are bit-stable.
void pin_blas_threads();

}  // namespace direcnet::detail
