// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mcavd/rng.hpp"
#include "mcavd/tensor.hpp"

namespace mcavd {

/// Key-validity mask, one entry per row of the masked sequence (1 = keep).
/// An empty mask means "all valid".
using Mask = std::vector<uint8_t>;

// Matrix products (2-D operands).
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a * b^T without materializing the transpose.
template <typename T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);

// Elementwise / broadcast arithmetic.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// x (m x n) plus a length-n row broadcast over every row (bias add).
template <typename T> Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T c);

// Nonlinearities and normalization.
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);
/// Per-vector normalization over the last axis: gamma * (x - mean) / sqrt(var + eps) + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

/// Training mode zeroes each element with probability p and scales the
/// survivors by 1/(1-p); identity in evaluation mode or when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, SplitRng& rng);

// Reductions and shape plumbing.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
/// log(max(x, floor)); the clamped region has zero derivative.
template <typename T> Tensor<T> log_clamped(const Tensor<T>& x, T floor);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> slice_rows(const Tensor<T>& x, int start, int count);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, int start, int count);

/// Sets column j of every row to -inf where keep[j] == 0. Gradients do not
/// flow through masked entries.
template <typename T> Tensor<T> mask_cols(const Tensor<T>& x, const Mask& keep);

/// Gathers rows of `table` (vocab x dim) by id. Row `pad_id` never receives
/// gradient so the padding embedding stays fixed at zero.
template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const std::vector<int>& ids, int pad_id = 0);

} // namespace mcavd
