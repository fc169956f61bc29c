#pragma once

#include <cstdint>

namespace mltc::kernels {

// Dense inner loops shared by the tensor ops. The default entry points are
// OpenMP-parallel over independent output rows; every output element is
// produced by the same serial reduction order regardless of thread count, so
// results are bit-identical to the serial reference implementations below.

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] = a[m x p] * b[n x p]^T
void matmul_bt(const double* a, const double* b, double* c, int m, int p, int n);

// c[m x n] = a[p x m]^T * b[p x n]
void matmul_at(const double* a, const double* b, double* c, int p, int m, int n);

// In-place row-wise softmax with max subtraction, rows x n.
void softmax_rows(double* x, int rows, int n);

// out = x / sqrt(mean(x^2) + eps) * gain, applied per row.
void rms_norm_rows(const double* x, const double* gain, double* out, int rows, int n,
                   double eps);

namespace serial {

// Reference implementations: identical arithmetic, no threading. Kept for
// the equivalence tests and the kernel benchmark.
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_bt(const double* a, const double* b, double* c, int m, int p, int n);
void matmul_at(const double* a, const double* b, double* c, int p, int m, int n);
void softmax_rows(double* x, int rows, int n);
void rms_norm_rows(const double* x, const double* gain, double* out, int rows, int n,
                   double eps);

}  // namespace serial

}  // namespace mltc::kernels
