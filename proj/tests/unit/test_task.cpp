#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cord/common/error.hpp"
#include "cord/task/audio.hpp"
#include "cord/task/dataset.hpp"
#include "cord/task/instance.hpp"
#include "cord/task/vocab.hpp"

namespace cord::task {
namespace {

namespace fs = std::filesystem;

// brute-force evaluator, independent of task::evaluate
int brute(const Program& p, std::vector<int>* trace) {
  long long t = p.initial;
  for (const auto& s : p.steps) {
    if (s.op == Op::kAdd) t = t + s.operand;
    if (s.op == Op::kSub) t = t - s.operand;
    if (s.op == Op::kMul) t = t * s.operand;
    t = ((t % p.modulus) + p.modulus) % p.modulus;
    trace->push_back(static_cast<int>(t));
  }
  return static_cast<int>(t);
}

TEST(Instance, Examples) {
  const auto a = evaluate(Program{7, 3, {{Op::kAdd, 4}}});
  EXPECT_EQ(a.answer, 0);
  EXPECT_EQ(a.trace, std::vector<int>{0});

  const auto b = evaluate(Program{5, 2, {{Op::kMul, 3}, {Op::kAdd, 4}}});
  EXPECT_EQ(b.trace, (std::vector<int>{1, 0}));
  EXPECT_EQ(b.answer, 0);
}

TEST(Instance, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const int len = 1 + static_cast<int>(seed % 8);
    const int m = 5 + static_cast<int>(seed % 27);
    const auto inst = generate_instance(len, m, seed);
    std::vector<int> trace;
    EXPECT_EQ(inst.answer, brute(inst.program, &trace));
    EXPECT_EQ(inst.trace, trace);
    EXPECT_EQ(inst.program.steps.size(), static_cast<std::size_t>(len));
  }
}

TEST(Instance, DeterministicAndRangeChecked) {
  EXPECT_EQ(generate_instance(3, 7, 42).program, generate_instance(3, 7, 42).program);
  EXPECT_THROW(generate_instance(0, 7, 1), ConfigError);
  EXPECT_THROW(generate_instance(9, 7, 1), ConfigError);
  EXPECT_THROW(generate_instance(2, 4, 1), ConfigError);
  EXPECT_THROW(generate_instance(2, 32, 1), ConfigError);
}

TEST(TextEncoding, RoundTripAndLength) {
  std::set<std::vector<int>> seen;
  std::set<std::uint64_t> hashes;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const int len = 1 + static_cast<int>(seed % 8);
    const auto p = generate_instance(len, 7 + static_cast<int>(seed % 3), seed).program;
    const auto toks = encode_text(p);
    EXPECT_EQ(toks.size(), 2 * p.steps.size() + 3);
    EXPECT_EQ(toks.size(), text_length(p.steps.size()));
    EXPECT_EQ(decode_text(toks), p);
    if (hashes.insert(program_hash(p)).second) EXPECT_TRUE(seen.insert(toks).second);
  }
  EXPECT_THROW(decode_text({1, vocab::text::kPlus}), ConfigError);
}

TEST(Audio, NoiselessIsBijectiveRelabel) {
  const auto p = generate_instance(4, 7, 3).program;
  const auto text = encode_text(p);
  const auto frames = encode_audio(text, NoiseSpec{0, 0, 1, 1, 9});
  ASSERT_EQ(frames.size(), text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    EXPECT_EQ(frames[i], frame_of(text[i]));
    EXPECT_EQ(symbol_of(frames[i]), text[i]);
  }
  std::set<int> image;
  for (int s = 0; s < vocab::text::kSize; ++s) image.insert(frame_of(s));
  EXPECT_EQ(image.size(), static_cast<std::size_t>(vocab::audio::kSize));
  EXPECT_NE(frame_of(0), 0);
}

TEST(Audio, FullSubstitution) {
  const auto text = encode_text(generate_instance(6, 11, 4).program);
  const auto frames = encode_audio(text, NoiseSpec{1.0, 0, 1, 1, 2});
  ASSERT_EQ(frames.size(), text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = confusables(frame_of(text[i]));
    EXPECT_NE(frames[i], frame_of(text[i]));
    EXPECT_TRUE(frames[i] == c[0] || frames[i] == c[1]);
  }
}

TEST(Audio, SubstitutionRate) {
  std::vector<int> text;
  for (int i = 0; i < 10000; ++i) text.push_back(i % vocab::text::kSize);
  const auto frames = encode_audio(text, NoiseSpec{0.1, 0, 1, 1, 77});
  ASSERT_EQ(frames.size(), text.size());
  std::size_t sub = 0;
  for (std::size_t i = 0; i < text.size(); ++i) sub += frames[i] != frame_of(text[i]);
  EXPECT_NEAR(static_cast<double>(sub) / 10000.0, 0.1, 0.01);
}

TEST(Audio, CollapseRecoversRuns) {
  const std::vector<int> text{1, 2, 3, 4};
  const auto frames = encode_audio(text, NoiseSpec{0, 0, 2, 3, 5});
  EXPECT_GE(frames.size(), 8u);
  std::vector<int> expect;
  for (int s : text) expect.push_back(frame_of(s));
  EXPECT_EQ(collapse_frames(frames), expect);
}

TEST(Target, FormatAndParse) {
  const auto one = evaluate(Program{7, 3, {{Op::kAdd, 4}}});
  EXPECT_EQ(render_target(one), (std::vector<int>{0, vocab::out::kAnswer, 0, vocab::out::kEos}));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = generate_instance(1 + static_cast<int>(seed % 8), 7, seed);
    const auto y = render_target(inst);
    const auto pos = std::find(y.begin(), y.end(), vocab::out::kAnswer) - y.begin();
    EXPECT_EQ(y[static_cast<std::size_t>(pos) + 1], inst.answer);
    const auto parsed = parse_target(y);
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(parsed->trace, inst.trace);
    EXPECT_EQ(parsed->answer, inst.answer);
  }
  EXPECT_FALSE(parse_target({1, 2, vocab::out::kEos}).has_value());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class DatasetIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cord_ds_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(DatasetIo, SplitCounts) {
  DatasetSpec s;
  s.n = 10;
  s.seed = 1;
  const auto d = generate_dataset(s);
  EXPECT_EQ(d.train.size(), 8u);
  EXPECT_EQ(d.val.size(), 1u);
  EXPECT_EQ(d.test.size(), 1u);
}

TEST_F(DatasetIo, ByteIdenticalAndRoundTrip) {
  DatasetSpec s;
  s.n = 200;
  s.seed = 4;
  write_dataset(generate_dataset(s), dir_ / "a");
  write_dataset(generate_dataset(s), dir_ / "b");
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const auto back = read_dataset(dir_ / "a");
  const auto orig = generate_dataset(s);
  ASSERT_EQ(back.train.size(), orig.train.size());
  for (std::size_t i = 0; i < orig.train.size(); ++i) {
    EXPECT_EQ(back.train[i].x_audio, orig.train[i].x_audio);
    EXPECT_EQ(back.train[i].target, orig.train[i].target);
    EXPECT_EQ(back.train[i].instance.program, orig.train[i].instance.program);
  }
}

TEST_F(DatasetIo, MissingDirectoryNamesPath) {
  try {
    read_dataset(dir_ / "nope");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(e.path().find("nope"), std::string::npos);
  }
}

TEST(Dataset, NoProgramOverlapAcrossSplits) {
  DatasetSpec s;
  s.n = 3000;
  s.seed = 12;
  const auto d = generate_dataset(s);
  std::set<std::uint64_t> seen;
  std::size_t total = 0;
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const auto& p : *split) {
      EXPECT_TRUE(seen.insert(program_hash(p.instance.program)).second);
      ++total;
      EXPECT_EQ(p.x_text, encode_text(p.instance.program));
      EXPECT_EQ(p.target, render_target(p.instance));
    }
  }
  EXPECT_EQ(total, 3000u);
}

TEST(Dataset, PairJsonRoundTrip) {
  const auto pair = make_pair(9, generate_instance(3, 7, 9), NoiseSpec{0.1, 0.1, 1, 2, 3}, Split::kVal);
  const auto back = pair_from_json(pair_to_json(pair));
  EXPECT_EQ(back.id, pair.id);
  EXPECT_EQ(back.x_text, pair.x_text);
  EXPECT_EQ(back.x_audio, pair.x_audio);
  EXPECT_EQ(back.target, pair.target);
  EXPECT_EQ(back.split, Split::kVal);
  EXPECT_THROW(pair_from_json("{not json"), ConfigError);
}

TEST(Aux, BalancedDeterministicLabelled) {
  const auto a = generate_aux(900, 5);
  const auto b = generate_aux(900, 5);
  std::array<std::size_t, 3> counts{};
  for (const auto* s : {&a.train, &a.test}) {
    for (const auto& it : *s) ++counts[static_cast<std::size_t>(it.label)];
  }
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 300.0, 30.0);
  EXPECT_EQ(a.test.size(), 180u);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].x_audio, b.train[i].x_audio);
  // low-noise utterances are clean single-frame renderings
  for (const auto& it : a.train) {
    if (it.label != NoiseClass::kLow) continue;
    for (int f : it.x_audio) EXPECT_NO_THROW(symbol_of(f));
    EXPECT_NO_THROW({
      std::vector<int> text;
      for (int f : it.x_audio) text.push_back(symbol_of(f));
      decode_text(text);
    });
  }
  EXPECT_EQ(label_token(NoiseClass::kLow), vocab::out::kLabelLow);
  EXPECT_EQ(label_token(NoiseClass::kHigh), vocab::out::kLabelHigh);
}

}  // namespace
}  // namespace cord::task
