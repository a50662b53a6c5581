#include "cord/align/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/model/policy.hpp"

namespace cord::align {

template <typename Real>
bool TeacherBatch<Real>::off_policy() const {
  return std::all_of(items.begin(), items.end(), [](const TeacherItem<Real>& it) {
    return it.rollout.modality == model::Modality::kText;
  });
}

template <typename Real>
TeacherBatch<Real> make_teacher_batch(const model::ModelParams<Real>& snapshot,
                                      std::span<const task::ModalPair* const> pairs,
                                      double temperature, std::size_t max_len, std::uint64_t seed) {
  TeacherBatch<Real> batch;
  batch.items.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    rollout::RolloutOptions o;
    o.temperature = temperature;
    o.max_len = max_len;
    o.seed = derive_seed(seed, Stream::kRollout, pairs[i]->id);
    auto& item = batch.items[i];
    item.prompt_id = pairs[i]->id;
    item.audio = rollout::audio_condition(*pairs[i]);
    item.rollout = rollout::teacher_reference(snapshot, *pairs[i], o);
  }
  return batch;
}

template <typename Real>
double forward_kl_step(std::span<const Real> lt, std::span<const Real> la) {
  if (lt.size() != la.size()) {
    throw ShapeError("forward_kl_step: vocabulary sizes differ (" + std::to_string(lt.size()) +
                     " vs " + std::to_string(la.size()) + ")");
  }
  double d = 0;
  for (std::size_t v = 0; v < lt.size(); ++v) {
    const double t = static_cast<double>(lt[v]);
    if (t == -INFINITY) continue;
    d += std::exp(t) * (t - static_cast<double>(la[v]));
  }
  return d;
}

template <typename Real>
ad::Var<Real> sft_loss(ad::Graph<Real>& g, const model::BoundParams<Real>& params,
                       const TeacherBatch<Real>& batch) {
  std::vector<ad::Var<Real>> terms;
  for (const auto& item : batch.items) {
    if (item.rollout.tokens.empty()) continue;
    terms.push_back(model::sequence_logprob(g, params, item.audio,
                                            std::span<const int>(item.rollout.tokens)));
  }
  if (terms.empty()) return g.constant(ad::Tensor<Real>::scalar(Real(0)));
  const Real c = Real(-1) / static_cast<Real>(batch.items.size());
  std::vector<Real> coeffs(terms.size(), c);
  return ad::weighted_sum(ad::concat_rows<Real>(terms), std::span<const Real>(coeffs));
}

template <typename Real>
ad::Var<Real> fkl_loss(ad::Graph<Real>& g, const model::BoundParams<Real>& params,
                       const TeacherBatch<Real>& batch) {
  const std::size_t vocab = params.config->output_vocab;
  std::vector<ad::Var<Real>> rows;
  for (const auto& item : batch.items) {
    const auto& r = item.rollout;
    const std::size_t T = r.length();
    if (T == 0) continue;
    if (r.policy_logp.rank() != 2 || r.policy_logp.rows() != T || r.policy_logp.cols() != vocab) {
      throw ShapeError("fkl_loss: teacher stream does not match the output vocabulary");
    }
    ad::Var<Real> la = model::forward_logprobs(
        g, params, item.audio, std::span<const int>(r.tokens.data(), T - 1));
    ad::Tensor<Real> probs = r.policy_logp;
    for (auto& v : probs.data) v = std::exp(v);
    ad::Var<Real> lt = g.constant(r.policy_logp);
    ad::Var<Real> kl = ad::row_sum(ad::mul(g.constant(probs), ad::sub(lt, la)));
    const Real c = Real(1) / (static_cast<Real>(T) * static_cast<Real>(batch.items.size()));
    const std::vector<Real> w(T, c);
    rows.push_back(ad::weighted_sum(kl, std::span<const Real>(w)));
  }
  if (rows.empty()) return g.constant(ad::Tensor<Real>::scalar(Real(0)));
  return ad::sum(ad::concat_rows<Real>(rows));
}

#define CORD_INSTANTIATE_BASELINE(Real)                                                            \
  template struct TeacherBatch<Real>;                                                              \
  template TeacherBatch<Real> make_teacher_batch(const model::ModelParams<Real>&,                  \
                                                 std::span<const task::ModalPair* const>, double,  \
                                                 std::size_t, std::uint64_t);                      \
  template double forward_kl_step<Real>(std::span<const Real>, std::span<const Real>);             \
  template ad::Var<Real> sft_loss(ad::Graph<Real>&, const model::BoundParams<Real>&,               \
                                  const TeacherBatch<Real>&);                                      \
  template ad::Var<Real> fkl_loss(ad::Graph<Real>&, const model::BoundParams<Real>&,               \
                                  const TeacherBatch<Real>&);

CORD_INSTANTIATE_BASELINE(float)
CORD_INSTANTIATE_BASELINE(double)

}  // namespace cord::align
