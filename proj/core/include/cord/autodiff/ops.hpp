#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cord/autodiff/graph.hpp"

// Differentiable ops over rank-1/rank-2 tensors. No general broadcasting:
// every op states the shapes it accepts and throws ShapeError otherwise.
// Every op rejects a non-finite result with NumericError.
namespace cord::ad {

// [m,k] x [k,n] -> [m,n]
template <typename Real> Var<Real> matmul(Var<Real> a, Var<Real> b);
// [m,k] x [n,k]^T -> [m,n]
template <typename Real> Var<Real> matmul_bt(Var<Real> a, Var<Real> b);

// Same-shape elementwise ops.
template <typename Real> Var<Real> add(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> sub(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> mul(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> scale(Var<Real> x, Real factor);
template <typename Real> Var<Real> exp(Var<Real> x);
template <typename Real> Var<Real> gelu(Var<Real> x);

// x[m,n] + bias[n] on every row.
template <typename Real> Var<Real> add_row(Var<Real> x, Var<Real> bias);

// Rows `ids` of table[V,d] -> [len(ids), d].
template <typename Real> Var<Real> gather_rows(Var<Real> table, std::span<const int> ids);
// out[i] = x[i, ids[i]] -> [m]
template <typename Real> Var<Real> pick(Var<Real> x, std::span<const int> ids);

template <typename Real> Var<Real> concat_rows(std::span<const Var<Real>> parts);
template <typename Real> Var<Real> concat_cols(std::span<const Var<Real>> parts);
template <typename Real> Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count);
template <typename Real> Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count);

// Row-wise softmax where row i only sees columns j <= i + offset.
template <typename Real> Var<Real> causal_softmax(Var<Real> scores, std::size_t offset = 0);
// Row-wise log-softmax with max subtraction.
template <typename Real> Var<Real> log_softmax(Var<Real> logits);
template <typename Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gain, Var<Real> bias, Real eps = Real(1e-5));

// Reductions.
template <typename Real> Var<Real> sum(Var<Real> x);
template <typename Real> Var<Real> mean(Var<Real> x);
// [m,n] -> [m]
template <typename Real> Var<Real> row_sum(Var<Real> x);
// sum_i weights[i] * x[i]; weights are constants -> scalar.
template <typename Real> Var<Real> weighted_sum(Var<Real> x, std::span<const Real> weights);

// Identity forward; blocks all gradient.
template <typename Real> Var<Real> stop_gradient(Var<Real> x);

// Numeric kernels shared by the graph ops and the incremental decoder.
namespace kernels {
template <typename Real>
void log_softmax_row(std::span<const Real> in, std::span<Real> out);
template <typename Real>
Real gelu(Real x);
template <typename Real>
void layer_norm_row(std::span<const Real> in, std::span<const Real> gain,
                    std::span<const Real> bias, Real eps, std::span<Real> out);
// out[n] = in[k] x w[k,n]  (accumulates when accumulate=true)
template <typename Real>
void vec_mat(std::span<const Real> in, const Tensor<Real>& w, std::span<Real> out);
}  // namespace kernels

}  // namespace cord::ad
