#include "cord/align/token_align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/model/policy.hpp"

namespace cord::align {

void AlignConfig::validate() const {
  if (top_k < 1) throw ConfigError("align.top_k must be >= 1");
  if (!(alpha >= 1.0)) throw ConfigError("align.alpha must be >= 1");
  if (!(beta >= 1.0)) throw ConfigError("align.beta must be >= 1");
}

template <typename Real>
double reverse_kl_step(std::span<const Real> la, std::span<const Real> lt) {
  if (la.size() != lt.size()) {
    throw ShapeError("reverse_kl_step: vocabulary sizes differ (" + std::to_string(la.size()) +
                     " vs " + std::to_string(lt.size()) + ")");
  }
  double d = 0;
  for (std::size_t v = 0; v < la.size(); ++v) {
    const double a = static_cast<double>(la[v]);
    if (a == -INFINITY) continue;  // 0 * log 0 = 0
    d += std::exp(a) * (a - static_cast<double>(lt[v]));
  }
  return d;
}

double uniform_kl(std::span<const double> d) {
  if (d.empty()) return 0.0;
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::vector<double> topk_weights(std::span<const double> d, std::size_t k, double alpha) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  std::vector<double> w(d.size(), 1.0);
  for (std::size_t i = 0; i < std::min(k, d.size()); ++i) w[order[i]] = alpha;
  return w;
}

std::vector<double> positional_weights(std::size_t length, double beta) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double span = static_cast<double>(length - 1);
  for (std::size_t t = 0; t < length; ++t) {
    w[t] = beta - (beta - 1.0) * static_cast<double>(t) / span;
  }
  return w;
}

std::vector<double> combine_weights(std::span<const double> w_kl, std::span<const double> w_pos) {
  if (w_kl.size() != w_pos.size()) {
    throw ShapeError("combine_weights: length mismatch (" + std::to_string(w_kl.size()) + " vs " +
                     std::to_string(w_pos.size()) + ")");
  }
  std::vector<double> w(w_kl.size());
  for (std::size_t t = 0; t < w.size(); ++t) w[t] = w_kl[t] * w_pos[t];
  return w;
}

WeightVector compute_weights(std::span<const double> d, const AlignConfig& config) {
  WeightVector out;
  if (config.weighting_enabled) {
    out.w_kl = topk_weights(d, config.top_k, config.alpha);
    out.w_pos = positional_weights(d.size(), config.beta);
  } else {
    out.w_kl.assign(d.size(), 1.0);
    out.w_pos.assign(d.size(), 1.0);
  }
  out.w = combine_weights(out.w_kl, out.w_pos);
  return out;
}

double token_loss_value(std::span<const double> d, const AlignConfig& config) {
  const WeightVector w = compute_weights(d, config);
  double loss = 0;
  for (std::size_t t = 0; t < d.size(); ++t) loss += w.w[t] * d[t];
  return loss;
}

template <typename Real>
std::vector<double> trajectory_divergences(rollout::Trajectory<Real>& traj) {
  if (!traj.has_teacher()) throw Error("trajectory has no recorded text-conditioned stream");
  const std::size_t T = traj.length();
  std::vector<double> d(T);
  for (std::size_t t = 0; t < T; ++t) {
    d[t] = reverse_kl_step<Real>(traj.policy_logp.row(t), traj.teacher_logp.row(t));
  }
  traj.divergences = d;
  return d;
}

template <typename Real>
ad::Var<Real> token_loss(ad::Graph<Real>& g, const model::BoundParams<Real>& params,
                         const model::Condition& audio, const rollout::Trajectory<Real>& traj,
                         const AlignConfig& config) {
  const std::size_t T = traj.length();
  if (T == 0) return g.constant(ad::Tensor<Real>::scalar(Real(0)));
  if (!traj.has_teacher() || traj.teacher_logp.rows() != T) {
    throw Error("token_loss: trajectory lacks a text-conditioned stream of length T");
  }
  const std::span<const int> prefix(traj.tokens.data(), T - 1);
  ad::Var<Real> all = model::forward_logprobs(g, params, audio, prefix);  // [T, V]
  ad::Var<Real> teacher = g.constant(traj.teacher_logp);
  ad::Var<Real> diff = ad::sub(all, teacher);
  ad::Var<Real> d = ad::row_sum(ad::mul(ad::exp(all), diff));  // [T]

  std::vector<double> dv(d.value().data.begin(), d.value().data.end());
  const WeightVector w = compute_weights(dv, config);
  std::vector<Real> wr(w.w.begin(), w.w.end());
  return ad::weighted_sum(d, std::span<const Real>(wr));
}

#define CORD_INSTANTIATE_TOKEN_ALIGN(Real)                                                      \
  template double reverse_kl_step<Real>(std::span<const Real>, std::span<const Real>);          \
  template std::vector<double> trajectory_divergences(rollout::Trajectory<Real>&);              \
  template ad::Var<Real> token_loss(ad::Graph<Real>&, const model::BoundParams<Real>&,          \
                                    const model::Condition&, const rollout::Trajectory<Real>&,  \
                                    const AlignConfig&);

CORD_INSTANTIATE_TOKEN_ALIGN(float)
CORD_INSTANTIATE_TOKEN_ALIGN(double)

}  // namespace cord::align
