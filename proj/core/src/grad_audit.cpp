#include "cord/train/grad_audit.hpp"

#include "cord/align/baseline.hpp"
#include "cord/align/seq_align.hpp"
#include "cord/align/token_align.hpp"
#include "cord/common/parallel.hpp"
#include "cord/task/dataset.hpp"

namespace cord::train {

namespace {

// Everything a loss needs besides the parameters, drawn once.
template <typename Real>
struct Fixture {
  model::ModelConfig config;
  model::ModelParams<Real> params;
  model::Condition audio;
  rollout::Trajectory<Real> traj;
  align::RolloutGroup<Real> group;
  align::TeacherBatch<Real> teacher;
};

template <typename Real>
Fixture<Real> make_fixture(const AuditOptions& opt) {
  Fixture<Real> f;
  auto& cfg = f.config;
  cfg.d_model = opt.d_model;
  cfg.layers = opt.layers;
  cfg.heads = opt.heads;
  cfg.context = 48;
  cfg.max_output = 12;
  cfg.seed = opt.seed;
  cfg.validate();
  f.params = model::init_params<Real>(cfg);
  // non-trivial gains and biases so their gradients are exercised
  Rng jitter(derive_seed(opt.seed, Stream::kInit, 0xa0d17));
  for (auto& r : f.params.named()) {
    for (auto& v : r.value->data) v += static_cast<Real>(0.1 * jitter.normal());
  }

  const auto inst = task::generate_instance(2, 7, derive_seed(opt.seed, Stream::kData));
  const task::NoiseSpec noise{0.2, 0.2, 1, 2, derive_seed(opt.seed, Stream::kNoise)};
  const task::ModalPair pair = task::make_pair(1, inst, noise);
  f.audio = rollout::audio_condition(pair);

  rollout::RolloutOptions ro;
  ro.max_len = 5;
  ro.record_teacher = true;
  ro.seed = derive_seed(opt.seed, Stream::kRollout, 0);
  f.traj = rollout::sample_rollout(f.params, pair, ro);

  rollout::GroupOptions go;
  go.size = 2;
  go.max_len = 5;
  go.seed = derive_seed(opt.seed, Stream::kRollout, 1);
  f.group.prompt_id = pair.id;
  f.group.trajectories = rollout::sample_group(f.params, pair, go);
  // fixed mixed rewards keep the advantages non-zero whatever was sampled
  f.group.rewards = {1, 0};
  f.group.advantages = align::advantages(f.group.rewards);

  for (std::uint64_t k = 0; k < 2; ++k) {
    rollout::RolloutOptions to;
    to.max_len = 5;
    to.seed = derive_seed(opt.seed, Stream::kRollout, 2 + k);
    f.teacher.items.push_back({pair.id, f.audio, rollout::teacher_reference(f.params, pair, to)});
  }
  return f;
}

template <typename Real>
rollout::Trajectory<double> widen(const rollout::Trajectory<Real>& t) {
  rollout::Trajectory<double> out;
  out.prompt_id = t.prompt_id;
  out.tokens = t.tokens;
  out.policy_logp = t.policy_logp.template cast<double>();
  out.teacher_logp = t.teacher_logp.template cast<double>();
  out.sampled_logp.assign(t.sampled_logp.begin(), t.sampled_logp.end());
  out.divergences = t.divergences;
  out.temperature = t.temperature;
  out.terminated_by = t.terminated_by;
  out.modality = t.modality;
  return out;
}

template <typename Real>
Fixture<double> widen(const Fixture<Real>& f) {
  Fixture<double> out;
  out.config = f.config;
  out.params = model::init_params<double>(f.config);  // values copied by the checker
  out.audio = f.audio;
  out.traj = widen(f.traj);
  out.group.prompt_id = f.group.prompt_id;
  for (const auto& t : f.group.trajectories) out.group.trajectories.push_back(widen(t));
  out.group.rewards = f.group.rewards;
  out.group.advantages = f.group.advantages;
  for (const auto& it : f.teacher.items) out.teacher.items.push_back({it.prompt_id, it.audio, widen(it.rollout)});
  return out;
}

const align::AlignConfig kAlign{3, 2.0, 2.0, true};

template <typename Real>
ad::LossBuilder<Real> builder(const Fixture<Real>& f, const std::string& loss) {
  return [&f, loss](ad::Graph<Real>& g, std::span<const ad::Var<Real>> leaves) {
    const auto b = model::bind_leaves<Real>(f.config, leaves);
    if (loss == "l_tok") return align::token_loss(g, b, f.audio, f.traj, kAlign);
    if (loss == "l_seq") return align::sequence_loss(g, b, f.audio, f.group);
    if (loss == "l_sft") return align::sft_loss(g, b, f.teacher);
    return align::fkl_loss(g, b, f.teacher);
  };
}

const char* const kLosses[] = {"l_tok", "l_seq", "l_sft", "l_fkl"};

}  // namespace

template <typename Real>
std::vector<LossAudit> audit_losses(const AuditOptions& opt) {
  const Fixture<Real> base = make_fixture<Real>(opt);
  ad::GradCheckOptions check = opt.check;
  check.max_elements = opt.max_elements;
  check.seed = opt.seed;
  constexpr std::size_t n = std::size(kLosses);
  std::vector<LossAudit> out(n);
  // the checker perturbs parameters in place, so each loss gets its own copy
  parallel_for(n, [&](std::size_t i) {
    Fixture<Real> f = base;
    const auto refs = f.params.named();
    out[i].loss = kLosses[i];
    if constexpr (std::is_same_v<Real, double>) {
      out[i].report = ad::grad_check<double>(builder(f, kLosses[i]), refs, check);
    } else {
      Fixture<double> wide = widen(f);
      const auto wide_refs = wide.params.named();
      out[i].report = ad::grad_check_against<Real>(builder(f, kLosses[i]), refs,
                                                   builder(wide, kLosses[i]), wide_refs, check);
    }
  });
  return out;
}

template std::vector<LossAudit> audit_losses<float>(const AuditOptions&);
template std::vector<LossAudit> audit_losses<double>(const AuditOptions&);

}  // namespace cord::train
