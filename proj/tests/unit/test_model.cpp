#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cord/model/checkpoint.hpp"
#include "cord/model/decoder.hpp"
#include "cord/model/policy.hpp"
#include "fixtures.hpp"

namespace cord::model {
namespace {

using cord::testing::tiny_config;
using cord::testing::tiny_pair;
using cord::testing::tiny_params;

Condition text_cond(const task::ModalPair& p) { return {Modality::kText, p.x_text, vocab::out::kSep}; }
Condition audio_cond(const task::ModalPair& p) { return {Modality::kAudio, p.x_audio, vocab::out::kSep}; }

TEST(Params, ParameterCountByHand) {
  ModelConfig c = tiny_config();
  c.output_vocab = 64;
  const std::size_t d = 16, h = 64;
  std::size_t block = 0;
  block += 2 * d;            // ln1
  block += 4 * d * d;        // q k v o
  block += 2 * d;            // ln2
  block += d * h + h;        // w1 b1
  block += h * d + d;        // w2 b2
  std::size_t total = 35 * d + 35 * d + 2 * d + 64 * d + 48 * d;
  total += 2 * block + 2 * d + d * 64 + 64;
  EXPECT_EQ(expected_parameter_count(c), total);
  EXPECT_EQ(init_params<double>(c).parameter_count(), total);
}

TEST(Params, SeedDeterminism) {
  const auto a = init_params<float>(tiny_config(1));
  const auto b = init_params<float>(tiny_config(1));
  const auto c = init_params<float>(tiny_config(2));
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Params, ConfigValidation) {
  auto c = tiny_config();
  c.context = c.max_output + 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Policy, EmptyPrefixGivesOneRowAndNormalizes) {
  const auto p = tiny_params<double>();
  const auto pair = tiny_pair();
  const auto lp = forward(p, audio_cond(pair), std::span<const int>{});
  ASSERT_EQ(lp.rows(), 1u);
  ASSERT_EQ(lp.cols(), static_cast<std::size_t>(vocab::out::kSize));
  const std::vector<int> y = pair.target;
  const auto full = forward(p, text_cond(pair), y);
  ASSERT_EQ(full.rows(), y.size() + 1);
  for (std::size_t r = 0; r < full.rows(); ++r) {
    double s = 0;
    for (double v : full.row(r)) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Policy, Causality) {
  const auto p = tiny_params<double>();
  const auto pair = tiny_pair();
  std::vector<int> y = pair.target;
  const auto longer = forward(p, audio_cond(pair), y);
  y.pop_back();
  const auto shorter = forward(p, audio_cond(pair), y);
  for (std::size_t r = 0; r < shorter.rows(); ++r) {
    for (std::size_t c = 0; c < shorter.cols(); ++c) {
      EXPECT_EQ(shorter.at(r, c), longer.at(r, c)) << r << "," << c;
    }
  }
}

TEST(Policy, InputValidation) {
  const auto p = tiny_params<double>();
  Condition bad{Modality::kText, {0, 99}, vocab::out::kSep};
  EXPECT_THROW(forward(p, bad, std::span<const int>{}), ConfigError);
  Condition ok{Modality::kText, {0, 1}, vocab::out::kSep};
  const std::vector<int> y{1, 500};
  EXPECT_THROW(forward(p, ok, y), ConfigError);
  const std::vector<int> too_long(60, 1);
  EXPECT_THROW(forward(p, ok, too_long), ConfigError);
  Condition empty{Modality::kText, {}, vocab::out::kSep};
  EXPECT_THROW(forward(p, empty, std::span<const int>{}), ConfigError);
}

TEST(SequenceLogprob, NaiveLoopAndChainRule) {
  const auto p = tiny_params<double>();
  const auto pair = tiny_pair();
  const auto cond = audio_cond(pair);
  const std::vector<int>& y = pair.target;
  // naive: one fresh forward per step
  double naive = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const auto lp = forward(p, cond, std::span<const int>(y.data(), t));
    naive += lp.at(t, static_cast<std::size_t>(y[t]));
  }
  const double total = sequence_logprob(p, cond, std::span<const int>(y));
  EXPECT_NEAR(total, naive, 1e-10);

  const auto first = forward(p, cond, std::span<const int>{});
  EXPECT_NEAR(sequence_logprob(p, cond, std::span<const int>(y.data(), 1)),
              first.at(0, static_cast<std::size_t>(y[0])), 1e-14);

  const std::size_t k = 2;
  const auto lp = forward(p, cond, std::span<const int>(y));
  double rest = 0;
  for (std::size_t t = k; t < y.size(); ++t) rest += lp.at(t, static_cast<std::size_t>(y[t]));
  EXPECT_NEAR(total, sequence_logprob(p, cond, std::span<const int>(y.data(), k)) + rest, 1e-10);
  EXPECT_THROW(sequence_logprob(p, cond, std::span<const int>{}), ConfigError);
}

TEST(SequenceLogprob, GraphMatchesValue) {
  const auto p = tiny_params<double>();
  const auto pair = tiny_pair();
  ad::Graph<double> g(false);
  const auto b = bind<double>(g, p, nullptr);
  const auto v = sequence_logprob(g, b, audio_cond(pair), std::span<const int>(pair.target));
  EXPECT_DOUBLE_EQ(v.item(), sequence_logprob(p, audio_cond(pair), std::span<const int>(pair.target)));
}

TEST(Policy, RejectsParamsFromOtherGraph) {
  const auto p = tiny_params<double>();
  ad::Graph<double> g1(false), g2(false);
  const auto b = bind<double>(g1, p, nullptr);
  EXPECT_THROW(forward_logprobs(g2, b, audio_cond(tiny_pair()), std::span<const int>{}), Error);
}

template <typename Real>
void decoder_matches_forward(double tol) {
  const auto p = tiny_params<Real>();
  const auto pair = tiny_pair();
  for (const auto& cond : {text_cond(pair), audio_cond(pair)}) {
    const auto full = forward(p, cond, std::span<const int>(pair.target));
    IncrementalDecoder<Real> dec(p, cond);
    for (std::size_t t = 0; t <= pair.target.size(); ++t) {
      std::vector<double> z(dec.logits().begin(), dec.logits().end());
      double m = *std::max_element(z.begin(), z.end());
      double s = 0;
      for (double v : z) s += std::exp(v - m);
      for (std::size_t c = 0; c < z.size(); ++c) {
        EXPECT_NEAR(z[c] - m - std::log(s), full.at(t, c), tol);
      }
      if (t < pair.target.size()) dec.push(pair.target[t]);
    }
  }
}

TEST(Decoder, MatchesFullForward) {
  decoder_matches_forward<double>(1e-10);
  decoder_matches_forward<float>(2e-4);
}

TEST(Checkpoint, RoundTripAndMismatch) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "cord_ckpt_test";
  fs::create_directories(dir);
  const auto p = tiny_params<float>(8);
  save_checkpoint(p, dir / "a.ckpt");
  auto q = init_params<float>(tiny_config(8));
  load_checkpoint(q, dir / "a.ckpt");
  EXPECT_TRUE(p == q);

  auto cfg = tiny_config(8);
  cfg.d_model = 32;
  auto wrong = init_params<float>(cfg);
  EXPECT_THROW(load_checkpoint(wrong, dir / "a.ckpt"), ConfigError);
  auto wide = init_params<double>(tiny_config(8));
  EXPECT_THROW(load_checkpoint(wide, dir / "a.ckpt"), ConfigError);
  EXPECT_THROW(load_checkpoint(q, dir / "missing.ckpt"), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace cord::model
