#pragma once

#include <span>

#include "cord/autodiff/ops.hpp"
#include "cord/model/params.hpp"

namespace cord::model {

// Sequence layout: [modality tag] x_1..x_n [separator] y_1..y_T.
// Row t of the result is log p(. | y_<=t, x): T+1 rows, the first predicting
// y_1 from the empty prefix.
template <typename Real>
ad::Var<Real> forward_logprobs(ad::Graph<Real>& graph, const BoundParams<Real>& params,
                               const Condition& condition, std::span<const int> prefix);

// Value-only forward: [T+1, output_vocab] log-probabilities.
template <typename Real>
Tensor<Real> forward(const ModelParams<Real>& params, const Condition& condition,
                     std::span<const int> prefix);

// sum_t log p(y_t | y_<t, x); y must be non-empty.
template <typename Real>
ad::Var<Real> sequence_logprob(ad::Graph<Real>& graph, const BoundParams<Real>& params,
                               const Condition& condition, std::span<const int> y);

template <typename Real>
Real sequence_logprob(const ModelParams<Real>& params, const Condition& condition,
                      std::span<const int> y);

// Throws ConfigError for out-of-alphabet tokens or a sequence exceeding the
// context budget.
void validate_inputs(const ModelConfig& config, const Condition& condition,
                     std::span<const int> prefix);

}  // namespace cord::model
