#pragma once

#include <span>
#include <vector>

#include "cord/autodiff/graph.hpp"
#include "cord/model/params.hpp"
#include "cord/rollout/rollout.hpp"
#include "cord/task/dataset.hpp"

namespace cord::align {

// Off-policy supervision: rollouts drawn from the text-conditioned policy of a
// frozen snapshot, with their text-conditioned distributions recorded.
template <typename Real>
struct TeacherItem {
  std::uint64_t prompt_id = 0;
  model::Condition audio;
  rollout::Trajectory<Real> rollout;  // modality == kText; policy_logp is the teacher stream
};

template <typename Real>
struct TeacherBatch {
  std::vector<TeacherItem<Real>> items;

  // Every supervised prefix came from a text-conditioned rollout.
  bool off_policy() const;
};

template <typename Real>
TeacherBatch<Real> make_teacher_batch(const model::ModelParams<Real>& snapshot,
                                      std::span<const task::ModalPair* const> pairs,
                                      double temperature, std::size_t max_len, std::uint64_t seed);

// KL(p_text || p_audio) for one step, from log-probabilities.
template <typename Real>
double forward_kl_step(std::span<const Real> logp_text, std::span<const Real> logp_audio);

// Mean over the batch of -sum_t log p(y_t | y_<t, x_audio) on teacher tokens.
template <typename Real>
ad::Var<Real> sft_loss(ad::Graph<Real>& graph, const model::BoundParams<Real>& params,
                       const TeacherBatch<Real>& batch);

// Mean over the batch of the per-trajectory mean over steps of
// KL(p_text || p_audio) along teacher prefixes.
template <typename Real>
ad::Var<Real> fkl_loss(ad::Graph<Real>& graph, const model::BoundParams<Real>& params,
                       const TeacherBatch<Real>& batch);

}  // namespace cord::align
