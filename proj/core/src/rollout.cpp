#include "cord/rollout/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/model/decoder.hpp"

namespace cord::rollout {

model::Condition text_condition(const task::ModalPair& pair) {
  return {model::Modality::kText, pair.x_text, vocab::out::kSep};
}

model::Condition audio_condition(const task::ModalPair& pair) {
  return {model::Modality::kAudio, pair.x_audio, vocab::out::kSep};
}

template <typename Real>
int argmax_token(std::span<const Real> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

template <typename Real>
int sample_token(std::span<const Real> logits, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw ConfigError("sampling temperature must be positive");
  double mx = -INFINITY;
  for (Real l : logits) mx = std::max(mx, static_cast<double>(l) / temperature);
  std::vector<double> w(logits.size());
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(static_cast<double>(logits[i]) / temperature - mx);
    total += w[i];
  }
  const double u = rng.uniform() * total;
  double acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  // u landed in the rounding slack above the last partial sum
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0) return static_cast<int>(i);
  }
  return 0;
}

template <typename Real>
Trajectory<Real> sample(const ModelParams<Real>& params, const Condition& policy,
                        const Condition* teacher, const RolloutOptions& options) {
  if (!options.greedy && !(options.temperature > 0.0)) {
    throw ConfigError("sampling temperature must be positive");
  }
  const std::size_t vocab_size = params.config.output_vocab;
  std::size_t cap = std::min(options.max_len, params.config.max_output);
  // tag + condition + separator + (T - 1) pushed tokens must fit the context
  const std::size_t primed = policy.tokens.size() + 2;
  cap = primed > params.config.context ? 0 : std::min(cap, params.config.context - primed + 1);

  Trajectory<Real> traj;
  traj.temperature = options.greedy ? 0.0 : options.temperature;
  traj.modality = policy.modality;
  traj.terminated_by = Termination::kMaxLen;

  model::IncrementalDecoder<Real> dec(params, policy);
  Rng rng(options.seed);
  std::vector<Real> rows;
  std::vector<Real> row(vocab_size);
  for (std::size_t t = 0; t < cap; ++t) {
    const auto logits = dec.logits();
    ad::kernels::log_softmax_row<Real>(logits, row);
    const int token = options.greedy ? argmax_token<Real>(logits)
                                     : sample_token<Real>(logits, options.temperature, rng);
    rows.insert(rows.end(), row.begin(), row.end());
    traj.sampled_logp.push_back(row[static_cast<std::size_t>(token)]);
    traj.tokens.push_back(token);
    if (token == vocab::out::kEos) {
      traj.terminated_by = Termination::kEos;
      break;
    }
    if (t + 1 < cap) dec.push(token);
  }
  if (cap == 0) traj.terminated_by = Termination::kMaxLen;
  traj.policy_logp = model::Tensor<Real>({traj.tokens.size(), vocab_size}, std::move(rows));

  if (teacher != nullptr && options.record_teacher) {
    std::vector<Real> trows;
    trows.reserve(traj.tokens.size() * vocab_size);
    if (!traj.tokens.empty()) {
      model::IncrementalDecoder<Real> tdec(params, *teacher);
      for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        ad::kernels::log_softmax_row<Real>(tdec.logits(), row);
        trows.insert(trows.end(), row.begin(), row.end());
        if (t + 1 < traj.tokens.size()) tdec.push(traj.tokens[t]);
      }
    }
    traj.teacher_logp = model::Tensor<Real>({traj.tokens.size(), vocab_size}, std::move(trows));
  }
  return traj;
}

template <typename Real>
Trajectory<Real> sample_rollout(const ModelParams<Real>& params, const task::ModalPair& pair,
                                const RolloutOptions& options) {
  const Condition audio = audio_condition(pair);
  const Condition text = text_condition(pair);
  Trajectory<Real> t = sample(params, audio, options.record_teacher ? &text : nullptr, options);
  t.prompt_id = pair.id;
  return t;
}

template <typename Real>
Trajectory<Real> teacher_reference(const ModelParams<Real>& params, const task::ModalPair& pair,
                                   const RolloutOptions& options) {
  RolloutOptions o = options;
  o.record_teacher = false;
  Trajectory<Real> t = sample(params, text_condition(pair), nullptr, o);
  t.prompt_id = pair.id;
  return t;
}

template <typename Real>
std::vector<Trajectory<Real>> sample_group(const ModelParams<Real>& params,
                                           const task::ModalPair& pair,
                                           const GroupOptions& options) {
  if (options.size < 2) throw ConfigError("group size must be at least 2");
  std::vector<Trajectory<Real>> group;
  group.reserve(options.size);
  for (std::size_t i = 0; i < options.size; ++i) {
    RolloutOptions o;
    o.temperature = options.temperature;
    o.max_len = options.max_len;
    o.seed = options.shared_seed ? options.seed : derive_seed(options.seed, Stream::kRollout, i);
    group.push_back(sample_rollout(params, pair, o));
  }
  return group;
}

#define CORD_INSTANTIATE_ROLLOUT(Real)                                                          \
  template int sample_token<Real>(std::span<const Real>, double, Rng&);                         \
  template int argmax_token<Real>(std::span<const Real>);                                       \
  template Trajectory<Real> sample(const ModelParams<Real>&, const Condition&, const Condition*, \
                                   const RolloutOptions&);                                      \
  template Trajectory<Real> sample_rollout(const ModelParams<Real>&, const task::ModalPair&,     \
                                           const RolloutOptions&);                              \
  template Trajectory<Real> teacher_reference(const ModelParams<Real>&, const task::ModalPair&,  \
                                              const RolloutOptions&);                           \
  template std::vector<Trajectory<Real>> sample_group(const ModelParams<Real>&,                 \
                                                      const task::ModalPair&, const GroupOptions&);

CORD_INSTANTIATE_ROLLOUT(float)
CORD_INSTANTIATE_ROLLOUT(double)

}  // namespace cord::rollout
