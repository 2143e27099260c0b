#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spoofdet/tensor.hpp"

namespace spoofdet {

// Differentiable primitives. Each computes its result eagerly; when any
// input is tape-tracked the op appends one backward closure to that tape.
// Mixing inputs from two different tapes is a usage error. Backward never
// mutates forward values, only accumulates into gradient buffers.

// Elementwise (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor relu(const Tensor& x);
// tanh approximation: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))
Tensor gelu(const Tensor& x);

// Structure.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // rank-2
// Sub-matrix view-copy of rows [r0,r1) and cols [c0,c1) of a rank-2 tensor.
Tensor block(const Tensor& x, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);
Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// Reductions (over all elements).
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Linear algebra ([m×k]·[k×n]; _nt multiplies by the transpose of b [n×k]).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// x[R×C] + bias[C] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

// Neural-net blocks.
// Standardizes the last axis (population variance, then affine gain/shift).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);
// Softmax over the last axis.
Tensor softmax(const Tensor& x);
// 2x2 max pooling, stride 2; extents must be even.
Tensor maxpool2(const Tensor& x);
// 3x3 convolution, stride 1, zero "same" padding.
// x: [C_in×H×W], w: [C_out×C_in×3×3], bias: [C_out] -> [C_out×H×W].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);

// Q/K/V projections carry no bias: a key bias shifts every score in a
// softmax row equally, so it can never receive gradient; only the output
// projection keeps one.
struct AttentionParams {
  Tensor wq;  // [d×d]
  Tensor wk;
  Tensor wv;
  Tensor wo, bo;  // [d×d], [d]
};

// Post-softmax attention matrices captured for inspection, one [T×T]
// row-major grid per (example, head) in evaluation order.
struct MhaDiag {
  std::vector<std::vector<double>> attention;
};

// Scaled dot-product attention over h heads (scale 1/sqrt(d/h)), heads
// concatenated, output-projected. x: [T×d].
Tensor multi_head_attention(const Tensor& x, const AttentionParams& params, std::size_t heads,
                            MhaDiag* diag = nullptr);
// Same computation applied independently to `batch` stacked examples of T
// rows each (x: [(batch·T)×d]); the QKV/output projections run as single
// large matrix products, attention itself is per example.
Tensor mha_stacked(const Tensor& x, const AttentionParams& params, std::size_t heads,
                   std::size_t batch, MhaDiag* diag = nullptr);

// Weighted mean negative log-likelihood of softmaxed logits [B×K] against
// integer labels. `class_weights` (size K) defaults to all-ones; weighting
// divides by the sum of the participating weights.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels,
                     std::span<const double> class_weights = {});

// Negative control for the gradient checker: when armed, relu/gelu backward
// is scaled by 1.05, which any finite-difference comparison must flag.
void set_backward_fault_injection(bool armed);
bool backward_fault_injection();

// True when values (and gradient, if tracked) are all finite.
bool all_finite(const Tensor& t);

}  // namespace spoofdet
