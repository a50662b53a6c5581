#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cord/autodiff/graph.hpp"
#include "cord/model/params.hpp"
#include "cord/rollout/rollout.hpp"

namespace cord::align {

// The token right after the first ANSWER marker, if any.
std::optional<int> extract_answer(std::span<const int> y);

struct JudgeVerdict {
  std::optional<int> answer;
  std::optional<int> reference;
  int reward = 0;
};

JudgeVerdict judge(std::span<const int> y, std::span<const int> y_hat);
// 1 iff both answers exist and agree.
int judge_reward(std::span<const int> y, std::span<const int> y_hat);

// A_i = r_i - mean(r). Throws ConfigError for fewer than two rewards.
std::vector<double> advantages(std::span<const double> rewards);

template <typename Real>
struct RolloutGroup {
  std::uint64_t prompt_id = 0;
  std::vector<rollout::Trajectory<Real>> trajectories;
  std::vector<int> reference;  // y_hat
  std::vector<double> rewards;
  std::vector<double> advantages;

  bool zero_advantage() const;
};

// Judges every member against the reference and fills rewards/advantages.
template <typename Real>
RolloutGroup<Real> make_group(std::uint64_t prompt_id, std::vector<rollout::Trajectory<Real>> trajs,
                              std::vector<int> reference);

// -(1/N) sum_i A_i * log p(y_i | x_audio); advantages are constants.
// length_normalized divides each log-likelihood by its length.
template <typename Real>
ad::Var<Real> sequence_loss(ad::Graph<Real>& graph, const model::BoundParams<Real>& params,
                            const model::Condition& audio, const RolloutGroup<Real>& group,
                            bool length_normalized = false);

}  // namespace cord::align
