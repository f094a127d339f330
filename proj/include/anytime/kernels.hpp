#pragma once

#include <span>

#include "anytime/matrix.hpp"

// Dense kernels used by the network. The top-level functions are OpenMP
// parallel over output rows; every output element is produced by exactly one
// thread with a fixed summation order, so results do not depend on the thread
// count. `reference::` holds the naive serial versions kept for testing.
namespace anytime::kernels {

/// out = a * b^T   (a: m x k, b: n x k, out: m x n)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);

/// out = a^T * b   (a: r x m, b: r x n, out: m x n)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);

/// out = a * b     (a: m x k, b: k x n, out: m x n)
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);

/// Adds `bias` to every row of `m`.
void add_row_bias(Matrix& m, std::span<const double> bias);

/// out[j] = sum_i m(i, j)
void column_sums(const Matrix& m, std::span<double> out);

/// Work (multiply-adds) below which the kernels stay single threaded.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

namespace reference {

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace reference

}  // namespace anytime::kernels
