#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "entransformer/tensor.hpp"

namespace entransformer {

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// x + y where y's shape is a trailing suffix of x's shape (bias rows,
// positional tables added to every batch element).
Tensor add_broadcast(const Tensor& x, const Tensor& y);

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Applies a [k x n] matrix to the last axis of x: [..., k] -> [..., n].
Tensor matmul_last(const Tensor& x, const Tensor& w);

// Batched product [B, m, k] . [B, k, n] -> [B, m, n]; with transpose_b the
// second operand is [B, n, k] and is used transposed.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::span<const std::size_t> axes);
Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes);

// Selects rows along axis 0; indices may repeat.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);

// Normalizes over the last axis, then applies per-feature gain and shift.
inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = kLayerNormEps);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Euclidean (Frobenius) norm of all entries. Gradient at the origin is 0.
Tensor l2_norm(const Tensor& x);

// Per-row Euclidean norm of a [N, K] tensor -> [N]; same subgradient rule.
Tensor row_l2_norms(const Tensor& x);

}  // namespace entransformer
