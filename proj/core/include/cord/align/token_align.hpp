#pragma once

#include <span>
#include <vector>

#include "cord/autodiff/graph.hpp"
#include "cord/model/params.hpp"
#include "cord/rollout/rollout.hpp"

namespace cord::align {

struct AlignConfig {
  std::size_t top_k = 20;
  double alpha = 2.0;
  double beta = 2.0;
  bool weighting_enabled = true;  // false: uniform weights (plain on-policy distillation)

  void validate() const;
};

struct WeightVector {
  std::vector<double> w_kl;
  std::vector<double> w_pos;
  std::vector<double> w;
};

// KL(p_audio || p_text) from log-probabilities, summed over the full vocabulary.
template <typename Real>
double reverse_kl_step(std::span<const Real> logp_audio, std::span<const Real> logp_text);

// Mean of D; 0 for an empty vector.
double uniform_kl(std::span<const double> d);

// alpha on the K largest entries (ties: earlier position wins), 1 elsewhere.
std::vector<double> topk_weights(std::span<const double> d, std::size_t k, double alpha);

// Linear decay from beta at the first step to 1 at the last; T=1 gives [1].
std::vector<double> positional_weights(std::size_t length, double beta);

std::vector<double> combine_weights(std::span<const double> w_kl, std::span<const double> w_pos);

WeightVector compute_weights(std::span<const double> d, const AlignConfig& config);

// D_t along a trajectory from its recorded streams; also stored in
// traj.divergences.
template <typename Real>
std::vector<double> trajectory_divergences(rollout::Trajectory<Real>& traj);

// Sum_t w_t * D_t. The audio branch is recomputed in `graph` along the
// trajectory's own prefixes; the recorded text stream and the weights enter
// as constants. Returns a constant zero for T=0.
template <typename Real>
ad::Var<Real> token_loss(ad::Graph<Real>& graph, const model::BoundParams<Real>& params,
                         const model::Condition& audio, const rollout::Trajectory<Real>& traj,
                         const AlignConfig& config);

// Same value as token_loss for precomputed D (no graph).
double token_loss_value(std::span<const double> d, const AlignConfig& config);

}  // namespace cord::align
