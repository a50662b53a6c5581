#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cord/model/checkpoint.hpp"
#include "cord/train/trainer.hpp"

namespace cord::train {
namespace {

namespace fs = std::filesystem;

Settings tiny_settings(Method method) {
  Config c;
  for (const char* kv : {"data.n=60", "data.max_steps=2", "aux.n=30", "model.d_model=16",
                         "model.heads=2", "model.context=64", "model.max_output=12",
                         "train.max_len=12", "eval.max_len=12", "train.batch_size=4",
                         "pretrain.steps=20", "pretrain.batch_size=4", "train.steps=4",
                         "train.eval_steps=2,4", "optim.lr=1e-3", "seed=5"}) {
    c.apply_override(kv);
  }
  c.set("train.method", method_name(method));
  return resolve(c);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Pretrain, DeterministicAndLossFalls) {
  auto s = tiny_settings(Method::kCord);
  const auto corpus = load_corpus(s);
  const auto a = pretrain(s, corpus);
  const auto b = pretrain(s, corpus);
  EXPECT_TRUE(a.params == b.params);
  ASSERT_EQ(a.metrics.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
}

TEST(Trainer, BatchesCoverEpoch) {
  auto s = tiny_settings(Method::kCord);
  const auto corpus = load_corpus(s);
  Trainer t(s, model::init_params<Real>(s.model), corpus);
  const std::size_t n = corpus.data.train.size();
  const std::size_t per_epoch = (n + 3) / 4;
  std::multiset<std::size_t> seen;
  for (std::size_t step = 1; step <= per_epoch; ++step) {
    for (auto i : t.batch_indices(step)) seen.insert(i);
  }
  EXPECT_EQ(seen.size(), n);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), n);
  EXPECT_NE(t.batch_indices(1), t.batch_indices(per_epoch + 1));
  EXPECT_THROW(t.batch_indices(0), ConfigError);
}

TEST(Trainer, MethodRoutingAndDecomposition) {
  for (Method m : {Method::kCord, Method::kOpd, Method::kGrpo, Method::kSft, Method::kFkl}) {
    auto s = tiny_settings(m);
    s.train.seq_weight = 0.7;
    const auto corpus = load_corpus(s);
    Trainer t(s, model::init_params<Real>(s.model), corpus);
    for (std::size_t step = 1; step <= 2; ++step) {
      const auto r = t.train_step(step);
      EXPECT_EQ(r.total, r.l_tok + 0.7 * r.l_seq) << method_name(m);
      EXPECT_TRUE(std::isfinite(r.grad_norm));
    }
    const auto& c = t.calls();
    EXPECT_EQ(c.optimizer_steps, 2u);
    EXPECT_EQ(c.token_loss > 0, m == Method::kCord || m == Method::kOpd) << method_name(m);
    EXPECT_EQ(c.sequence_loss > 0, m == Method::kCord || m == Method::kGrpo) << method_name(m);
    EXPECT_EQ(c.sft_loss > 0, m == Method::kSft);
    EXPECT_EQ(c.fkl_loss > 0, m == Method::kFkl);
    if (m == Method::kGrpo || m == Method::kCord) EXPECT_EQ(t.last_rewards().size(), 4u);
  }
}

// Blocks zeroed: the output depends on the previous token only, so text and
// audio conditions give identical distributions and every rollout is the same.
Params condition_blind(const model::ModelConfig& cfg) {
  auto p = model::init_params<Real>(cfg);
  for (auto& b : p.blocks) {
    for (auto* t : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.b1, &b.w2, &b.b2}) t->fill(0);
  }
  p.modality_embed.fill(0);
  p.pos_embed.fill(0);
  p.out_proj.fill(0);
  for (std::size_t i = 0; i < p.token_embed.rows(); ++i) {
    for (std::size_t j = 0; j < p.token_embed.cols(); ++j) p.token_embed.at(i, j) = (i % 16 == j) ? 1.f : 0.f;
  }
  // prev token row i -> next token (i + 1) with a huge margin
  for (std::size_t j = 0; j < 16; ++j) p.out_proj.at(j, (j + 1) % 38) = 40.f;
  return p;
}

TEST(Trainer, VanishingObjectivesLeaveOnlyDecay) {
  auto s = tiny_settings(Method::kCord);
  s.train.batch_size = 2;
  const auto corpus = load_corpus(s);
  const Params base = condition_blind(s.model);
  Trainer t(s, base, corpus);
  const auto r = t.train_step(1);
  EXPECT_NEAR(r.l_tok, 0.0, 1e-6);
  EXPECT_EQ(r.l_seq, 0.0);
  EXPECT_EQ(r.zero_advantage_fraction, 1.0);
  EXPECT_NEAR(r.total, 0.0, 1e-6);
}

TEST(Experiment, WritesFilesDeterministically) {
  auto s = tiny_settings(Method::kCord);
  const auto corpus = load_corpus(s);
  const auto base = model::init_params<Real>(s.model);
  const auto root = fs::temp_directory_path() / "cord_exp_test";
  fs::remove_all(root);
  const auto a = run_experiment(s, corpus, base, root / "a");
  const auto b = run_experiment(s, corpus, base, root / "b");
  for (const char* f : {"metrics.csv", "rewards.csv", "eval.csv", "step2.ckpt", "step4.ckpt", "final.ckpt",
                        "report.txt"}) {
    ASSERT_TRUE(fs::exists(root / "a" / f)) << f;
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(root / "a" / "timing.csv"));
  const auto metrics = slurp(root / "a" / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), metrics_csv_header());
  EXPECT_EQ(a.evals.size(), 3u);
  EXPECT_EQ(a.evals[1].step, 2u);

  auto p = model::init_params<Real>(s.model);
  model::load_checkpoint(p, root / "a" / "final.ckpt");
  const auto e1 = evaluate_point(s, corpus, p, 4, a.evals[0].text);
  EXPECT_EQ(e1.audio, a.evals.back().audio);
  EXPECT_EQ(e1.text, a.evals.back().text);
  fs::remove_all(root);
}

TEST(Report, StabilityAndSweep) {
  ExperimentResult r;
  r.arm = "cord";
  r.evals = {{0, 90, 40, 80, 50}, {500, 89, 45, 80, 45}};
  const auto table = stability_report(std::span<const ExperimentResult>(&r, 1));
  EXPECT_NE(table.find("cord"), std::string::npos);
  EXPECT_NE(table.find("500"), std::string::npos);

  std::vector<SweepPoint> pts{{1.0, {3000, 90, 40, 80, 50}, 0}, {2.0, {3000, 90, 46, 80, 44}, 0}};
  finish_sweep(pts);
  EXPECT_EQ(pts[0].relative, 0.0);
  EXPECT_EQ(pts[1].relative, 6.0);
  const auto csv = sweep_csv(pts);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "alpha_beta,text,audio,aux,delta_base,relative_delta_score");
  EXPECT_EQ(arm_name(TrainSettings{}), "cord");
  TrainSettings u;
  u.align.weighting_enabled = false;
  EXPECT_EQ(arm_name(u), "cord_uniform");
}

}  // namespace
}  // namespace cord::train
