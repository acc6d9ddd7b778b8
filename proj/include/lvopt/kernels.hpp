#pragma once

#include "lvopt/tensor.hpp"

namespace lvopt::kernels {

// Execution policy for the data-parallel kernels. Serial is the reference
// implementation; Parallel runs the same per-element loops with OpenMP over
// independent output rows, so results are bit-identical to Serial.
enum class Exec { Auto, Serial, Parallel };

bool parallel_enabled();
void set_parallel_enabled(bool on);
int thread_count();

// C = A * B (or C += with accumulate). A: m x k, B: k x n.
void matmul(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate = false,
            Exec exec = Exec::Auto);
// C = A^T * B (A: m x k viewed transposed). Used by backward passes.
void matmul_tn(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate = false,
               Exec exec = Exec::Auto);
// C = A * B^T.
void matmul_nt(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate = false,
               Exec exec = Exec::Auto);

// Y = X + b broadcast over rows (b: 1 x cols).
void add_rowvec(const Tensor& X, const Tensor& b, Tensor& Y, Exec exec = Exec::Auto);
// Y = max(X, 0).
void relu(const Tensor& X, Tensor& Y, Exec exec = Exec::Auto);
// Y = max(X - S, 0), S same shape as X.
void shifted_relu(const Tensor& X, const Tensor& S, Tensor& Y, Exec exec = Exec::Auto);
// Y = X .* X.
void square(const Tensor& X, Tensor& Y, Exec exec = Exec::Auto);
// Y = c * X.
void scale(const Tensor& X, double c, Tensor& Y, Exec exec = Exec::Auto);
// Z = X + Y elementwise.
void add(const Tensor& X, const Tensor& Y, Tensor& Z, Exec exec = Exec::Auto);
// Sum of all entries (serial reduction, fixed order).
double sum_all(const Tensor& X);
// g_b += column sums of G (backward of add_rowvec).
void colsum_acc(const Tensor& G, Tensor& gb);

}  // namespace lvopt::kernels
