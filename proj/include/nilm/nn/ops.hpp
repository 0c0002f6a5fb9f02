#pragma once

#include <cstddef>
#include <vector>

#include "nilm/nn/graph.hpp"

// Differentiable operations recorded on a Graph. All operate on row-major
// tensors; "matrix" means rank 2.
namespace nilm::nn {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// a[m×k] · b[k×n]
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

// x[C×...] + b[C], bias broadcast over every trailing element.
Var add_bias(const Var& x, const Var& b);

// x[C_in×L], w[C_out×C_in×k]. Output length L. Causal mode pads only the past;
// otherwise the kernel is centred (k odd).
Var conv1d(const Var& x, const Var& w, std::size_t dilation, bool causal);
// x[C_in×H×W], w[C_out×C_in×kh×kw], zero padding on all sides.
Var conv2d(const Var& x, const Var& w, std::size_t stride, std::size_t padding);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var square(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);

// Rank-2 operands stacked along rows (all must share the column count).
Var concat_rows(const std::vector<Var>& parts);
// Rows [begin, end) of a rank-1 or rank-2 tensor.
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
// Columns [begin, end) of a matrix.
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);

// out[c][i][j] = a[c][i] + b[c][j] for a, b of shape [C×N]; output [C×N×N].
Var pairwise_sum(const Var& a, const Var& b);

// Bilinear resize of a matrix with corner alignment (identity when sizes match).
Var resize_bilinear(const Var& a, std::size_t out_rows, std::size_t out_cols);
// (a - min) / (max - min); a constant input maps to all zeros.
Var minmax_scale(const Var& a);

// Non-overlapping average pooling. x[C×H×W] with H, W divisible by k.
Var avg_pool2d(const Var& x, std::size_t k);
// x[C×L] with L divisible by k.
Var avg_pool1d(const Var& x, std::size_t k);

// Multi-label cross entropy of probabilities against {0,1} targets; the
// probabilities are clamped to [eps, 1 - eps]. Returns a scalar (sum over entries).
Var binary_cross_entropy(const Var& probs, const Tensor& targets, double eps = 1e-7);
// Mean squared error against a constant target.
Var mse(const Var& pred, const Tensor& target);

}  // namespace nilm::nn
