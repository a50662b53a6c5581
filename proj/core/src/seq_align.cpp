#include "cord/align/seq_align.hpp"

#include <algorithm>

#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/model/policy.hpp"
#include "cord/task/vocab.hpp"

namespace cord::align {

std::optional<int> extract_answer(std::span<const int> y) {
  const auto it = std::find(y.begin(), y.end(), vocab::out::kAnswer);
  if (it == y.end() || it + 1 == y.end()) return std::nullopt;
  return *(it + 1);
}

JudgeVerdict judge(std::span<const int> y, std::span<const int> y_hat) {
  JudgeVerdict v;
  v.answer = extract_answer(y);
  v.reference = extract_answer(y_hat);
  v.reward = (v.answer && v.reference && *v.answer == *v.reference) ? 1 : 0;
  return v;
}

int judge_reward(std::span<const int> y, std::span<const int> y_hat) { return judge(y, y_hat).reward; }

std::vector<double> advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ConfigError("group-relative advantages need at least 2 rewards");
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> a(rewards.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rewards[i] - mean;
  return a;
}

template <typename Real>
bool RolloutGroup<Real>::zero_advantage() const {
  return std::all_of(advantages.begin(), advantages.end(), [](double a) { return a == 0.0; });
}

template <typename Real>
RolloutGroup<Real> make_group(std::uint64_t prompt_id, std::vector<rollout::Trajectory<Real>> trajs,
                              std::vector<int> reference) {
  RolloutGroup<Real> g;
  g.prompt_id = prompt_id;
  g.trajectories = std::move(trajs);
  g.reference = std::move(reference);
  for (const auto& t : g.trajectories) {
    g.rewards.push_back(static_cast<double>(judge_reward(t.tokens, g.reference)));
  }
  g.advantages = advantages(g.rewards);
  return g;
}

template <typename Real>
ad::Var<Real> sequence_loss(ad::Graph<Real>& g, const model::BoundParams<Real>& params,
                            const model::Condition& audio, const RolloutGroup<Real>& group,
                            bool length_normalized) {
  const std::size_t n = group.trajectories.size();
  if (group.advantages.size() != n) throw Error("sequence_loss: advantages not computed");
  std::vector<ad::Var<Real>> terms;
  std::vector<Real> coeffs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& y = group.trajectories[i].tokens;
    if (group.advantages[i] == 0.0 || y.empty()) continue;
    double c = -group.advantages[i] / static_cast<double>(n);
    if (length_normalized) c /= static_cast<double>(y.size());
    terms.push_back(model::sequence_logprob(g, params, audio, std::span<const int>(y)));
    coeffs.push_back(static_cast<Real>(c));
  }
  if (terms.empty()) return g.constant(ad::Tensor<Real>::scalar(Real(0)));
  ad::Var<Real> stacked = ad::concat_rows<Real>(terms);
  return ad::weighted_sum(stacked, std::span<const Real>(coeffs));
}

#define CORD_INSTANTIATE_SEQ_ALIGN(Real)                                                         \
  template struct RolloutGroup<Real>;                                                            \
  template RolloutGroup<Real> make_group(std::uint64_t, std::vector<rollout::Trajectory<Real>>,  \
                                         std::vector<int>);                                      \
  template ad::Var<Real> sequence_loss(ad::Graph<Real>&, const model::BoundParams<Real>&,        \
                                       const model::Condition&, const RolloutGroup<Real>&, bool);

CORD_INSTANTIATE_SEQ_ALIGN(float)
CORD_INSTANTIATE_SEQ_ALIGN(double)

}  // namespace cord::align
