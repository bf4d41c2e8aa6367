#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "surfer/tensor/tape.hpp"

// Differentiable ops over rank-2 tensors. Shapes must match exactly; the only
// implicit broadcast is add_bias (a 1xn row added to every row). Batched models
// stack samples along the row axis and pass the per-sample segment size to the
// segment-aware ops.
namespace surfer::tensor {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_bias(Var x, Var bias);
Var linear(Var x, Var weight, Var bias);

Var gelu(Var x);
Var tanh(Var x);

// Per-row normalization with learned 1xn scale and shift.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// axis 1 normalizes each row, axis 0 each column. Max-subtracted.
Var softmax(Var x, int axis);

// Column-wise softmax inside each consecutive block of `rows_per_segment` rows.
Var segment_softmax(Var x, std::size_t rows_per_segment);

// For each consecutive row block g: a_g^T * b_g. a is [G*n x m], b is [G*n x d],
// result is [G*m x d].
Var segment_matmul_tn(Var a, Var b, std::size_t rows_per_segment);

// Multi-head scaled dot-product attention, independently for each of `groups`
// consecutive row blocks. q: [G*nq x d], k and v: [G*nk x d].
Var attention(Var q, Var k, Var v, std::size_t groups = 1, std::size_t heads = 1);

// Single-head attention softmax(q k^T / sqrt(d)) v.
inline Var scaled_dot_attention(Var q, Var k, Var v) { return attention(q, k, v, 1, 1); }

// Attention weights for single-group single-head attention (diagnostics and tests).
Tensor attention_weights(const Tensor& q, const Tensor& k);

// Stack along the token (row) axis.
Var concat_rows(std::span<const Var> parts);

// Per-group concatenation: part p has groups * n_p rows; the output holds, for
// each group, that group's rows from part 0, then part 1, ...
Var concat_segments(std::span<const Var> parts, std::size_t groups);

// out[i] = x[index[i]]; repeated indices accumulate gradient.
Var gather_rows(Var x, std::vector<std::size_t> index);

// Mean of each consecutive row segment with the given lengths -> [segments x cols].
Var segment_mean(Var x, std::vector<std::size_t> lengths);

Var sum(Var x);
Var mean(Var x);

// Mean of squared differences over all elements.
Var mse(Var prediction, Var target);

// Mean over rows of the Euclidean distance between matching rows.
Var mean_row_distance(Var a, Var b);

}  // namespace surfer::tensor
