#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "cord/eval/analysis.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace cord::eval {
namespace {

using namespace cord::testing;
using V = std::vector<double>;

TEST(Percentile, Examples) {
  V v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(percentile(v, 80), 80.0);
  EXPECT_EQ(percentile(v, 0), 1.0);
  EXPECT_EQ(percentile(v, 100), 100.0);
  EXPECT_EQ(percentile(v, 80.5), 81.0);
  for (double q : {0.0, 13.0, 50.0, 99.0, 100.0}) EXPECT_EQ(percentile(V(7, 2.5), q), 2.5);
  EXPECT_THROW(percentile(V{}, 50), ConfigError);
  EXPECT_THROW(percentile(v, 101), ConfigError);
  EXPECT_THROW(percentile(v, -1), ConfigError);
}

TEST(Percentile, MatchesOracle) {
  Rng r(5);
  for (int k = 0; k < 200; ++k) {
    V v(1 + r.uniform_int(300));
    for (auto& x : v) x = std::round(10 * r.normal()) / 4;  // plenty of ties
    const double q = 100 * r.uniform();
    EXPECT_EQ(percentile(v, q), percentile_oracle(v, q));
  }
}

TEST(Percentile, RankIsNotPushedUpByRounding) {
  // 33.3 / 100 * 10000 evaluates to 3330.0000000000005
  V v(10000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(percentile(v, 33.3), 3330.0);
  for (double q : {0.07, 14.1, 28.7, 57.3, 99.9}) EXPECT_EQ(percentile(v, q), percentile_oracle(v, q));
}

TEST(Histogram, CountsMatchOracle) {
  const auto recs = synthetic_records(10000, 9);
  V d;
  for (const auto& r : recs) d.push_back(r.divergence);
  for (bool log_scale : {false, true}) {
    const auto h = histogram(d, 25, log_scale);
    ASSERT_EQ(h.edges.size(), 26u);
    EXPECT_EQ(h.counts, histogram_oracle(d, h.edges));
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), d.size());
  }
  const auto flat = histogram(V{1, 2, 3, 4}, 3);
  EXPECT_EQ(flat.counts, (std::vector<std::size_t>{1, 1, 2}));
  EXPECT_THROW(histogram(V{}, 3), ConfigError);
  EXPECT_THROW(histogram(V{1}, 0), ConfigError);
  EXPECT_NE(flat.to_csv().find("bin_edge,count\n1,1\n"), std::string::npos);
}

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson(V{1, 2, 3, 4}, V{8, 6, 4, 2}), -1.0, 1e-15);
  EXPECT_THROW(pearson(V{1, 1, 1}, V{1, 2, 3}), ConfigError);
  EXPECT_THROW(pearson(V{1}, V{1}), ConfigError);

  std::vector<KlRecord> dec;
  for (std::size_t t = 1; t <= 10; ++t) dec.push_back({0, t, 10, 10.0 - static_cast<double>(t), 0, false});
  EXPECT_NEAR(position_correlation(dec), -1.0, 1e-15);
}

TEST(Pearson, MatchesOracleAndNull) {
  auto recs = synthetic_records(10000, 3);
  V t, d;
  for (const auto& r : recs) {
    t.push_back(static_cast<double>(r.position));
    d.push_back(r.divergence);
  }
  EXPECT_NEAR(position_correlation(recs), pearson_oracle(t, d), 1e-12);
  // D drawn independently of t
  EXPECT_LT(std::abs(position_correlation(recs)), 0.05);
}

TEST(TokenFrequency, MatchesOracle) {
  const auto recs = synthetic_records(10000, 4);
  const auto tf = token_frequency_by_kl(recs, 80);
  V d;
  for (const auto& r : recs) d.push_back(r.divergence);
  EXPECT_EQ(tf.threshold, percentile_oracle(d, 80));
  const auto [hi, lo] = tally_oracle(recs, tf.threshold);
  EXPECT_EQ(tf.high, hi);
  EXPECT_EQ(tf.low, lo);
}

TEST(TokenFrequency, Boundaries) {
  std::vector<KlRecord> same;
  for (int i = 0; i < 20; ++i) same.push_back({0, 1, 1, 0.1 * i, 7, false});
  const auto tf = token_frequency_by_kl(same, 50);
  EXPECT_EQ(tf.high.front().first, 7);
  EXPECT_EQ(tf.low.front().first, 7);
  EXPECT_TRUE(token_frequency_by_kl(same, 100).high.empty());
}

TEST(KlHistogram, SkewSummary) {
  const auto recs = synthetic_records(5000, 2);
  const auto h = kl_histogram(recs, 30, 80);
  EXPECT_GT(h.mean, h.median);
  EXPECT_EQ(h.q, 80);
}

TEST(Dumps, RoundTrip) {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "cord_dump_test.jsonl";
  std::vector<TrajectoryDump> d{{3, {1, 31, 4, 32}, {0.5, 0.25, 1e-9, 2.0}, 1.0}, {4, {32}, {0.125}, 0.0}};
  write_trajectories(d, path);
  const auto back = read_trajectories(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].tokens, d[0].tokens);
  EXPECT_EQ(back[0].divergences, d[0].divergences);
  const auto recs = records_from_dumps(back);
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_EQ(recs[2].position, 3u);
  EXPECT_EQ(recs[2].length, 4u);
  EXPECT_EQ(recs[4].prompt_id, 4u);
  fs::remove(path);
  EXPECT_THROW(read_trajectories(path), IoError);
}

TEST(CollectRecords, OnePerStep) {
  const auto p = tiny_params<double>();
  std::vector<task::ModalPair> pairs{tiny_pair(1), tiny_pair(2)};
  const auto recs = collect_kl_records(p, std::span<const task::ModalPair>(pairs), 1.0, 6, 5);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    EXPECT_GE(r.divergence, 0.0);
    EXPECT_LE(r.position, r.length);
  }
  const auto again = collect_kl_records(p, std::span<const task::ModalPair>(pairs), 1.0, 6, 5);
  ASSERT_EQ(recs.size(), again.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(recs[i].divergence, again[i].divergence);
}

}  // namespace
}  // namespace cord::eval
