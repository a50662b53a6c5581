#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cord/common/rng.hpp"
#include "cord/model/params.hpp"
#include "cord/task/dataset.hpp"

namespace cord::rollout {

using model::Condition;
using model::ModelParams;

enum class Termination : std::uint8_t { kEos, kMaxLen };

struct RolloutOptions {
  double temperature = 1.0;
  bool greedy = false;          // argmax decoding; seed unused
  std::size_t max_len = 200;
  bool record_teacher = false;  // also record text-conditioned distributions
  std::uint64_t seed = 0;
};

// One sampled output sequence with the distributions of both modalities along
// its own prefixes. tokens include the terminating EOS when present.
template <typename Real>
struct Trajectory {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  model::Tensor<Real> policy_logp;   // [T, V] untempered, sampling condition
  model::Tensor<Real> teacher_logp;  // [T, V] text condition; empty unless recorded
  std::vector<Real> sampled_logp;    // log p(y_t) under policy_logp
  std::vector<double> divergences;   // D_t, filled by token alignment
  double temperature = 1.0;
  Termination terminated_by = Termination::kEos;
  model::Modality modality = model::Modality::kAudio;

  std::size_t length() const { return tokens.size(); }
  bool has_teacher() const { return teacher_logp.rank() == 2; }
};

model::Condition text_condition(const task::ModalPair& pair);
model::Condition audio_condition(const task::ModalPair& pair);

// Draws from softmax(logits / temperature) via inverse CDF.
template <typename Real>
int sample_token(std::span<const Real> logits, double temperature, Rng& rng);
template <typename Real>
int argmax_token(std::span<const Real> logits);

// Generic sampler: draws from `policy`, optionally records `teacher`
// distributions (gradient-free by construction) along the same prefixes.
template <typename Real>
Trajectory<Real> sample(const ModelParams<Real>& params, const Condition& policy,
                        const Condition* teacher, const RolloutOptions& options);

// y ~ p(. | x_audio), recording p(. | y_<t, x_text) when record_teacher.
template <typename Real>
Trajectory<Real> sample_rollout(const ModelParams<Real>& params, const task::ModalPair& pair,
                                const RolloutOptions& options);

// y_hat ~ p(. | x_text); the audio tokens never enter the forward pass.
template <typename Real>
Trajectory<Real> teacher_reference(const ModelParams<Real>& params, const task::ModalPair& pair,
                                   const RolloutOptions& options);

struct GroupOptions {
  std::size_t size = 4;
  double temperature = 1.5;
  std::size_t max_len = 200;
  std::uint64_t seed = 0;
  bool shared_seed = false;  // every member uses `seed` (sanity checks only)
};

// N >= 2 independent audio-conditioned trajectories with derived seeds.
template <typename Real>
std::vector<Trajectory<Real>> sample_group(const ModelParams<Real>& params,
                                           const task::ModalPair& pair,
                                           const GroupOptions& options);

}  // namespace cord::rollout
