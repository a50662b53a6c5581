#include "cord/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cord/align/baseline.hpp"
#include "cord/align/seq_align.hpp"
#include "cord/align/token_align.hpp"
#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/common/parallel.hpp"
#include "cord/common/rng.hpp"
#include "cord/eval/eval.hpp"
#include "cord/model/checkpoint.hpp"
#include "cord/model/policy.hpp"
#include "cord/rollout/rollout.hpp"

namespace cord::train {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string joined(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += num(v[i]);
  }
  return out;
}

void optimizer_step(ad::AdamW<Real>& opt, Params& params, Params& grads) {
  std::vector<ad::Tensor<Real>*> p;
  std::vector<const ad::Tensor<Real>*> g;
  for (auto& r : params.named()) p.push_back(r.value);
  for (auto& r : grads.named()) g.push_back(r.value);
  opt.step(p, g);
}

double clip(Params& grads, double max_norm) {
  const double norm = grads.l2_norm();
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (max_norm > 0 && norm > max_norm) grads.scale(static_cast<Real>(max_norm / norm));
  return norm;
}

// Fisher-Yates over [0, n) from a named substream.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(i)]);
  return p;
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot create file", path.string());
    write(header);
  }
  void write(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed", path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create file", path.string());
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace

Corpus load_corpus(const Settings& s) {
  Corpus c;
  if (!s.data_dir.empty()) {
    c.data = task::read_dataset(s.data_dir);
    c.aux = task::read_aux(s.data_dir);
  } else {
    c.data = task::generate_dataset(s.data);
    c.aux = task::generate_aux(s.aux_n, derive_seed(s.seed, Stream::kAux), s.data.modulus,
                               s.data.max_steps, s.aux_test_fraction);
  }
  if (c.data.train.empty()) throw ConfigError("training split is empty");
  return c;
}

PretrainResult pretrain(const Settings& s, const Corpus& corpus, std::ostream* log) {
  struct Example {
    model::Condition cond;
    std::vector<int> target;
  };
  std::vector<Example> main;
  for (const auto& pair : corpus.data.train) {
    main.push_back({rollout::text_condition(pair), pair.target});
    Rng pick(derive_seed(s.seed, Stream::kData, pair.id, 1));
    if (pick.bernoulli(s.pretrain.audio_fraction)) {
      main.push_back({rollout::audio_condition(pair), pair.target});
    }
  }
  std::vector<Example> aux;
  for (const auto& a : corpus.aux.train) {
    aux.push_back({eval::aux_condition(a), {task::label_token(a.label), vocab::out::kEos}});
  }

  PretrainResult result;
  result.params = model::init_params<Real>(s.model);
  Params& params = result.params;
  ad::AdamW<Real> opt(s.pretrain.optim);
  const std::size_t B = s.pretrain.batch_size;
  std::vector<Params> slots(B, params.zeros_like());
  Params total = params.zeros_like();
  std::vector<double> losses(B);
  std::vector<const Example*> batch(B);

  for (std::size_t step = 1; step <= s.pretrain.steps; ++step) {
    Rng rng(derive_seed(s.seed, Stream::kBatch, step, 0x5052));
    for (std::size_t k = 0; k < B; ++k) {
      const bool use_aux = !aux.empty() && rng.bernoulli(s.pretrain.aux_fraction);
      const auto& pool = use_aux ? aux : main;
      batch[k] = &pool[rng.uniform_int(pool.size())];
    }
    parallel_for(B, [&](std::size_t k) {
      slots[k].fill(0);
      ad::Graph<Real> g;
      auto bound = model::bind(g, params, &slots[k]);
      auto lp = model::sequence_logprob(g, bound, batch[k]->cond,
                                        std::span<const int>(batch[k]->target));
      auto loss = ad::scale(lp, Real(-1) / static_cast<Real>(B));
      losses[k] = static_cast<double>(loss.item());
      g.backward(loss);
    });
    total.fill(0);
    double loss = 0;
    for (std::size_t k = 0; k < B; ++k) {
      total.accumulate(slots[k]);
      loss += losses[k];
    }
    if (!std::isfinite(loss)) {
      throw NumericError("pretraining loss diverged at step " + std::to_string(step));
    }
    const double norm = clip(total, s.pretrain.clip_norm);
    optimizer_step(opt, params, total);
    result.metrics.push_back({step, loss, norm});
    if (log && (step % 500 == 0 || step == s.pretrain.steps)) {
      *log << "pretrain step " << step << " loss " << num(loss) << " grad_norm " << num(norm)
           << std::endl;
    }
  }
  return result;
}

Trainer::Trainer(const Settings& settings, Params base, const Corpus& corpus)
    : settings_(settings), corpus_(corpus), params_(std::move(base)),
      optimizer_(settings.train.optim) {
  const std::size_t n = corpus_.data.train.size();
  const std::size_t B = settings_.train.batch_size;
  steps_per_epoch_ = std::max<std::size_t>(1, (n + B - 1) / B);
}

std::vector<std::size_t> Trainer::batch_indices(std::size_t step) const {
  if (step == 0) throw ConfigError("train steps count from 1");
  const std::size_t n = corpus_.data.train.size();
  const std::size_t B = settings_.train.batch_size;
  const std::size_t epoch = (step - 1) / steps_per_epoch_;
  const std::size_t begin = ((step - 1) % steps_per_epoch_) * B;
  const auto perm = permutation(n, derive_seed(settings_.seed, Stream::kBatch, epoch));
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin),
          perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, begin + B))};
}

const Params& Trainer::teacher_snapshot(std::size_t epoch) {
  const std::size_t wanted = settings_.train.teacher_refresh == TeacherRefresh::kOnce ? 0 : epoch;
  if (snapshot_epoch_ != wanted) {
    // kOnce keeps the first snapshot, which is the untrained base
    if (!snapshot_epoch_ || settings_.train.teacher_refresh == TeacherRefresh::kPerEpoch) {
      snapshot_ = params_;
    }
    snapshot_epoch_ = wanted;
  }
  return snapshot_;
}

StepMetrics Trainer::train_step(std::size_t step) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainSettings& ts = settings_.train;
  const Method method = ts.method;
  const auto idx = batch_indices(step);
  const std::size_t B = idx.size();
  const std::size_t epoch = (step - 1) / steps_per_epoch_;
  const bool uses_tok = method == Method::kCord || method == Method::kOpd;
  const bool uses_seq = method == Method::kCord || method == Method::kGrpo;
  const bool uses_teacher = method == Method::kSft || method == Method::kFkl;
  const Params* teacher = uses_teacher ? &teacher_snapshot(epoch) : nullptr;

  align::AlignConfig acfg = ts.align;
  if (method == Method::kOpd) acfg.weighting_enabled = false;

  struct Out {
    double tok = 0, seq = 0, base = 0;
    double d_sum = 0;
    std::size_t d_count = 0;
    RewardRow rewards;
  };
  std::vector<Out> outs(B);
  std::vector<Params> grads(B, params_.zeros_like());
  const Real inv_b = Real(1) / static_cast<Real>(B);

  parallel_for(B, [&](std::size_t i) {
    const task::ModalPair& pair = corpus_.data.train[idx[i]];
    const model::Condition audio = rollout::audio_condition(pair);
    Out& out = outs[i];
    ad::Graph<Real> g;
    const auto bound = model::bind(g, params_, &grads[i]);
    std::vector<ad::Var<Real>> parts;

    if (uses_tok) {
      rollout::RolloutOptions o;
      o.temperature = ts.temperature;
      o.max_len = ts.max_len;
      o.record_teacher = true;
      o.seed = derive_seed(settings_.seed, Stream::kRollout, step, pair.id * 4);
      auto traj = rollout::sample_rollout(params_, pair, o);
      const auto d = align::trajectory_divergences(traj);
      out.d_sum = std::accumulate(d.begin(), d.end(), 0.0);
      out.d_count = d.size();
      const auto tok = align::token_loss(g, bound, audio, traj, acfg);
      out.tok = static_cast<double>(tok.item());
      parts.push_back(ad::scale(tok, inv_b));
    }
    if (uses_seq) {
      rollout::RolloutOptions ro;
      ro.greedy = ts.greedy_reference;
      ro.temperature = ts.temperature;
      ro.max_len = ts.max_len;
      ro.seed = derive_seed(settings_.seed, Stream::kRollout, step, pair.id * 4 + 1);
      const auto ref = rollout::teacher_reference(params_, pair, ro);
      rollout::GroupOptions go;
      go.size = ts.group_size;
      go.temperature = ts.grpo_temperature;
      go.max_len = ts.max_len;
      go.seed = derive_seed(settings_.seed, Stream::kRollout, step, pair.id * 4 + 2);
      auto group = align::make_group(pair.id, rollout::sample_group(params_, pair, go), ref.tokens);
      const auto seq = align::sequence_loss(g, bound, audio, group, ts.length_normalized);
      out.seq = static_cast<double>(seq.item());
      parts.push_back(ad::scale(seq, inv_b * static_cast<Real>(ts.seq_weight)));
      out.rewards = {step, pair.id, group.rewards, group.advantages, group.zero_advantage()};
    }
    if (uses_teacher) {
      rollout::RolloutOptions o;
      o.temperature = ts.teacher_temperature;
      o.max_len = ts.max_len;
      const std::size_t snap_epoch = ts.teacher_refresh == TeacherRefresh::kOnce ? 0 : epoch;
      o.seed = derive_seed(settings_.seed, Stream::kRollout, 0x7465616368ULL + snap_epoch, pair.id);
      align::TeacherBatch<Real> tb;
      tb.items.push_back({pair.id, audio, rollout::teacher_reference(*teacher, pair, o)});
      const auto loss = method == Method::kSft ? align::sft_loss(g, bound, tb)
                                               : align::fkl_loss(g, bound, tb);
      out.base = static_cast<double>(loss.item());
      parts.push_back(ad::scale(loss, inv_b));
    }
    ad::Var<Real> root = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) root = ad::add(root, parts[k]);
    g.backward(root);
  });

  StepMetrics m;
  m.step = step;
  Params total = params_.zeros_like();
  double d_sum = 0, reward_sum = 0, base_sum = 0;
  std::size_t d_count = 0, reward_count = 0, zero_groups = 0;
  rewards_.clear();
  for (std::size_t i = 0; i < B; ++i) {
    total.accumulate(grads[i]);
    m.l_tok += outs[i].tok;
    m.l_seq += outs[i].seq;
    base_sum += outs[i].base;
    d_sum += outs[i].d_sum;
    d_count += outs[i].d_count;
    if (uses_seq) {
      for (double r : outs[i].rewards.rewards) reward_sum += r;
      reward_count += outs[i].rewards.rewards.size();
      zero_groups += outs[i].rewards.zero_advantage ? 1 : 0;
      rewards_.push_back(std::move(outs[i].rewards));
    }
  }
  const double b = static_cast<double>(B);
  m.l_tok = (uses_tok ? m.l_tok : base_sum) / b;
  m.l_seq /= b;
  m.total = m.l_tok + ts.seq_weight * m.l_seq;
  if (!std::isfinite(m.total)) {
    throw NumericError("training loss is not finite at step " + std::to_string(step));
  }
  m.mean_divergence = d_count ? d_sum / static_cast<double>(d_count) : 0.0;
  m.mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
  m.zero_advantage_fraction = uses_seq ? static_cast<double>(zero_groups) / b : 0.0;
  m.grad_norm = clip(total, ts.clip_norm);
  optimizer_step(optimizer_, params_, total);

  calls_.token_loss += uses_tok ? B : 0;
  calls_.sequence_loss += uses_seq ? B : 0;
  calls_.sft_loss += method == Method::kSft ? B : 0;
  calls_.fkl_loss += method == Method::kFkl ? B : 0;
  ++calls_.optimizer_steps;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

EvalPoint evaluate_point(const Settings& s, const Corpus& corpus, const Params& params,
                         std::size_t step, double base_text) {
  const auto& items = corpus.data.split(s.eval.split);
  EvalPoint p;
  p.step = step;
  p.text = eval::evaluate(params, std::span<const task::ModalPair>(items), model::Modality::kText,
                          s.eval.max_len, s.eval.limit);
  p.audio = eval::evaluate(params, std::span<const task::ModalPair>(items),
                           model::Modality::kAudio, s.eval.max_len, s.eval.limit);
  p.aux = corpus.aux.test.empty()
              ? 0.0
              : eval::evaluate_aux(params, std::span<const task::AuxInstance>(corpus.aux.test));
  p.delta_base = eval::modality_gap(step == 0 ? p.text : base_text, p.audio);
  return p;
}

std::string arm_name(const TrainSettings& t) {
  if (t.method == Method::kCord && !t.align.weighting_enabled) return "cord_uniform";
  return method_name(t.method);
}

std::string metrics_csv_header() {
  return "step,l_tok,l_seq,total,mean_divergence,mean_reward,zero_advantage_fraction,grad_norm";
}

std::string metrics_csv_row(const StepMetrics& m) {
  return std::to_string(m.step) + ',' + num(m.l_tok) + ',' + num(m.l_seq) + ',' + num(m.total) +
         ',' + num(m.mean_divergence) + ',' + num(m.mean_reward) + ',' +
         num(m.zero_advantage_fraction) + ',' + num(m.grad_norm);
}

std::string eval_csv(const std::string& arm, std::span<const EvalPoint> evals) {
  std::string out = "arm,step,text,audio,aux,delta_base\n";
  for (const auto& e : evals) {
    out += arm + ',' + std::to_string(e.step) + ',' + num(e.text) + ',' + num(e.audio) + ',' +
           num(e.aux) + ',' + num(e.delta_base) + '\n';
  }
  return out;
}

ExperimentResult run_experiment(const Settings& s, const Corpus& corpus, const Params& base,
                                const std::filesystem::path& out_dir,
                                const std::optional<EvalPoint>& base_eval, std::ostream* log) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + ec.message(), out_dir.string());

  ExperimentResult result;
  result.arm = arm_name(s.train);
  const EvalPoint base_point = base_eval ? *base_eval : evaluate_point(s, corpus, base, 0, 0);
  result.evals.push_back(base_point);
  if (log) {
    *log << result.arm << " base: text " << num(base_point.text) << " audio "
         << num(base_point.audio) << " aux " << num(base_point.aux) << std::endl;
  }

  const bool grpo_like = s.train.method == Method::kCord || s.train.method == Method::kGrpo;
  CsvFile metrics(out_dir / "metrics.csv", metrics_csv_header());
  CsvFile timing(out_dir / "timing.csv", "step,wall_ms");
  std::optional<CsvFile> rewards;
  if (grpo_like) {
    rewards.emplace(out_dir / "rewards.csv", "step,prompt_id,rewards,advantages,zero_advantage_group");
  }

  Trainer trainer(s, base, corpus);
  for (std::size_t step = 1; step <= s.train.steps; ++step) {
    const StepMetrics m = trainer.train_step(step);
    result.metrics.push_back(m);
    metrics.write(metrics_csv_row(m));
    timing.write(std::to_string(step) + ',' + num(m.wall_ms));
    if (rewards) {
      for (const auto& r : trainer.last_rewards()) {
        rewards->write(std::to_string(r.step) + ',' + std::to_string(r.prompt_id) + ',' +
                       joined(r.rewards) + ',' + joined(r.advantages) + ',' +
                       (r.zero_advantage ? "1" : "0"));
      }
    }
    if (log && step % 100 == 0) {
      *log << result.arm << " step " << step << " total " << num(m.total) << " D " << num(m.mean_divergence)
           << " reward " << num(m.mean_reward) << " ms " << num(m.wall_ms) << std::endl;
    }
    if (std::find(s.train.eval_steps.begin(), s.train.eval_steps.end(), step) !=
        s.train.eval_steps.end()) {
      const EvalPoint p = evaluate_point(s, corpus, trainer.params(), step, base_point.text);
      result.evals.push_back(p);
      model::save_checkpoint(trainer.params(), out_dir / ("step" + std::to_string(step) + ".ckpt"));
      if (log) {
        *log << result.arm << " eval step " << step << ": text " << num(p.text) << " audio "
             << num(p.audio) << " aux " << num(p.aux) << " gap " << num(p.delta_base) << std::endl;
      }
    }
  }
  model::save_checkpoint(trainer.params(), out_dir / "final.ckpt");
  result.calls = trainer.calls();
  write_text(out_dir / "eval.csv", eval_csv(result.arm, result.evals));
  write_text(out_dir / "report.txt", stability_report(std::span<const ExperimentResult>(&result, 1)));
  return result;
}

std::string stability_report(std::span<const ExperimentResult> arms) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %6s %8s %8s %8s %8s\n", "arm", "step", "text", "audio",
                "aux", "gap");
  out << line;
  bool base_done = false;
  for (const auto& arm : arms) {
    for (const auto& e : arm.evals) {
      if (e.step == 0) {
        if (base_done) continue;
        base_done = true;
      }
      std::snprintf(line, sizeof line, "%-14s %6zu %8.2f %8.2f %8.2f %8.2f\n",
                    e.step == 0 ? "base" : arm.arm.c_str(), e.step, e.text, e.audio, e.aux,
                    e.delta_base);
      out << line;
    }
  }
  return out.str();
}

void finish_sweep(std::vector<SweepPoint>& points) {
  if (points.empty()) return;
  const SweepPoint* ref = &points.front();
  for (const auto& p : points) {
    if (p.value == 1.0) ref = &p;
  }
  const double ref_audio = ref->eval.audio;
  for (auto& p : points) p.relative = p.eval.audio - ref_audio;
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "alpha_beta,text,audio,aux,delta_base,relative_delta_score\n";
  for (const auto& p : points) {
    out += num(p.value) + ',' + num(p.eval.text) + ',' + num(p.eval.audio) + ',' + num(p.eval.aux) +
           ',' + num(p.eval.delta_base) + ',' + num(p.relative) + '\n';
  }
  return out;
}

}  // namespace cord::train
