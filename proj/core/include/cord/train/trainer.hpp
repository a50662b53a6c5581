#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cord/autodiff/optim.hpp"
#include "cord/model/params.hpp"
#include "cord/task/dataset.hpp"
#include "cord/train/config.hpp"

namespace cord::train {

// Experiments train in single precision; gradient checks use both.
using Real = float;
using Params = model::ModelParams<Real>;

struct Corpus {
  task::Dataset data;
  task::AuxDataset aux;
};

// Reads settings.data_dir when set, otherwise regenerates from data.* / aux.*.
Corpus load_corpus(const Settings& settings);

struct PretrainMetrics {
  std::size_t step = 0;
  double loss = 0;
  double grad_norm = 0;
};

struct PretrainResult {
  Params params;
  std::vector<PretrainMetrics> metrics;
};

// Cross-entropy on rendered targets: every train program in text form, a
// seeded audio_fraction subset in audio form, and the auxiliary task mixed in
// at aux_fraction. Throws NumericError on a non-finite loss.
PretrainResult pretrain(const Settings& settings, const Corpus& corpus, std::ostream* log = nullptr);

struct StepMetrics {
  std::size_t step = 0;
  double l_tok = 0;
  double l_seq = 0;
  double total = 0;  // l_tok + seq_weight * l_seq
  double mean_divergence = 0;
  double mean_reward = 0;
  double zero_advantage_fraction = 0;
  double grad_norm = 0;
  double wall_ms = 0;  // excluded from metrics.csv
};

struct RewardRow {
  std::size_t step = 0;
  std::uint64_t prompt_id = 0;
  std::vector<double> rewards;
  std::vector<double> advantages;
  bool zero_advantage = false;
};

struct CallCounts {
  std::size_t token_loss = 0;
  std::size_t sequence_loss = 0;
  std::size_t sft_loss = 0;
  std::size_t fkl_loss = 0;
  std::size_t optimizer_steps = 0;
};

class Trainer {
 public:
  Trainer(const Settings& settings, Params base, const Corpus& corpus);

  // One optimizer step on the next batch; `step` counts from 1.
  StepMetrics train_step(std::size_t step);

  // Batch of train-split indices used at `step`.
  std::vector<std::size_t> batch_indices(std::size_t step) const;

  const Params& params() const { return params_; }
  const CallCounts& calls() const { return calls_; }
  // Reward rows of the most recent step (GRPO-using methods only).
  const std::vector<RewardRow>& last_rewards() const { return rewards_; }

 private:
  const Params& teacher_snapshot(std::size_t epoch);

  Settings settings_;
  const Corpus& corpus_;
  Params params_;
  ad::AdamW<Real> optimizer_;
  CallCounts calls_;
  std::vector<RewardRow> rewards_;
  std::size_t steps_per_epoch_ = 1;
  std::optional<std::size_t> snapshot_epoch_;
  Params snapshot_;
};

struct EvalPoint {
  std::size_t step = 0;  // 0 = base checkpoint
  double text = 0;
  double audio = 0;
  double aux = 0;
  double delta_base = 0;  // base text accuracy - audio accuracy at this step
};

EvalPoint evaluate_point(const Settings& settings, const Corpus& corpus, const Params& params,
                         std::size_t step, double base_text);

struct ExperimentResult {
  std::string arm;
  std::vector<StepMetrics> metrics;
  std::vector<EvalPoint> evals;  // evals[0] is the base checkpoint
  CallCounts calls;
};

// Trains one arm from `base` and writes under out_dir: metrics.csv, rewards.csv
// (GRPO-using arms), eval.csv, timing.csv, step<N>.ckpt at every eval step,
// final.ckpt and report.txt. `base_eval`, when given, is reused as step 0.
ExperimentResult run_experiment(const Settings& settings, const Corpus& corpus, const Params& base,
                                const std::filesystem::path& out_dir,
                                const std::optional<EvalPoint>& base_eval = std::nullopt,
                                std::ostream* log = nullptr);

// Arm label: the method name, or "cord_uniform" for cord with weighting off.
std::string arm_name(const TrainSettings& train);

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);
std::string eval_csv(const std::string& arm, std::span<const EvalPoint> evals);

// Table 3 layout: one row per (arm, step) with text/audio/aux accuracy and gap.
std::string stability_report(std::span<const ExperimentResult> arms);

struct SweepPoint {
  double value = 0;
  EvalPoint eval;        // at the final step
  double relative = 0;   // audio accuracy minus the alpha=beta=1 point (or the first point)
};

std::string sweep_csv(std::span<const SweepPoint> points);
void finish_sweep(std::vector<SweepPoint>& points);

}  // namespace cord::train
