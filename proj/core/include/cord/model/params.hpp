#pragma once

#include <span>
#include <string>
#include <vector>

#include "cord/autodiff/grad_check.hpp"
#include "cord/autodiff/graph.hpp"
#include "cord/model/config.hpp"

namespace cord::model {

template <typename Real>
using Tensor = ad::Tensor<Real>;

template <typename Real>
struct BlockParams {
  Tensor<Real> ln1_gain, ln1_bias;
  Tensor<Real> wq, wk, wv, wo;
  Tensor<Real> ln2_gain, ln2_bias;
  Tensor<Real> w1, b1, w2, b2;
};

// All learnable tensors of the dual-modality decoder. One instance serves
// both the text-conditioned teacher role and the audio-conditioned policy.
template <typename Real>
struct ModelParams {
  ModelConfig config;
  Tensor<Real> text_embed;      // [text_vocab, d]
  Tensor<Real> audio_embed;     // [audio_vocab, d]
  Tensor<Real> modality_embed;  // [2, d]
  Tensor<Real> token_embed;     // [output_vocab, d]
  Tensor<Real> pos_embed;       // [context, d]
  std::vector<BlockParams<Real>> blocks;
  Tensor<Real> lnf_gain, lnf_bias;
  Tensor<Real> out_proj;        // [d, output_vocab]
  Tensor<Real> out_bias;        // [output_vocab]

  // Fixed name order; used by the optimizer, checkpoints and grad checks.
  std::vector<ad::ParamRef<Real>> named();
  std::vector<std::pair<std::string, const Tensor<Real>*>> named() const;
  std::size_t parameter_count() const;

  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  void fill(Real v);
  // this += other (shapes must match).
  void accumulate(const ModelParams& other);
  void scale(Real factor);
  double l2_norm() const;
  bool operator==(const ModelParams& other) const;
};

// Deterministic given config.seed: Gaussian weights with std 1/sqrt(fan_in)
// (residual output projections additionally scaled by 1/sqrt(2 * layers)),
// embeddings with std 1/sqrt(d), zero biases, unit LN gains.
template <typename Real>
ModelParams<Real> init_params(const ModelConfig& config);

// Closed-form parameter count for a config.
std::size_t expected_parameter_count(const ModelConfig& config);

template <typename Real>
struct BoundBlock {
  ad::Var<Real> ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2;
};

// Leaves of one graph bound to a parameter snapshot. With a null gradient
// target every leaf is a constant (pure inference).
template <typename Real>
struct BoundParams {
  const ModelConfig* config = nullptr;
  ad::Var<Real> text_embed, audio_embed, modality_embed, token_embed, pos_embed;
  std::vector<BoundBlock<Real>> blocks;
  ad::Var<Real> lnf_gain, lnf_bias, out_proj, out_bias;
};

template <typename Real>
BoundParams<Real> bind(ad::Graph<Real>& graph, const ModelParams<Real>& params,
                       ModelParams<Real>* grads);

// Reassembles leaves created in ModelParams::named() order (as grad_check
// does) into a BoundParams.
template <typename Real>
BoundParams<Real> bind_leaves(const ModelConfig& config, std::span<const ad::Var<Real>> leaves);

}  // namespace cord::model
