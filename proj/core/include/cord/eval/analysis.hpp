#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cord/model/params.hpp"
#include "cord/task/dataset.hpp"

namespace cord::eval {

struct KlRecord {
  std::uint64_t prompt_id = 0;
  std::size_t position = 1;  // 1-based t
  std::size_t length = 1;    // T
  double divergence = 0;     // D_t
  int token = 0;             // y_t
  bool correct = false;      // final answer of the trajectory
};

// Nearest-rank: the ceil(q/100 * n)-th smallest value (at least the first).
// q in [0, 100]; throws ConfigError on empty input or q out of range.
double percentile(std::span<const double> values, double q);

struct Histogram {
  std::vector<double> edges;  // bins + 1, ascending
  std::vector<std::size_t> counts;

  std::string to_csv() const;  // bin_edge,count (left edges)
};

// `bins` equal-width bins over [min, max], or geometric bins over
// [max(min, floor), max] when log_scale (values below floor land in bin 0).
// Bin i holds edges[i] <= v < edges[i+1]; the last bin also holds max.
Histogram histogram(std::span<const double> values, std::size_t bins, bool log_scale = false,
                    double floor = 1e-6);

struct KlHistogram {
  Histogram histogram;
  double threshold = 0;  // percentile(q)
  double q = 80;
  double mean = 0;
  double median = 0;
};

KlHistogram kl_histogram(std::span<const KlRecord> records, std::size_t bins, double q = 80,
                         bool log_scale = true);

// Pearson r; throws ConfigError for fewer than 2 points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);
double position_correlation(std::span<const KlRecord> records);

struct TokenFrequency {
  double threshold = 0;
  std::vector<std::pair<int, std::size_t>> high;  // D_t > threshold, by count desc then token
  std::vector<std::pair<int, std::size_t>> low;   // D_t <= threshold
};

TokenFrequency token_frequency_by_kl(std::span<const KlRecord> records, double q = 80);

// Records from audio rollouts of `pairs` (temperature sampling, teacher stream
// recorded). One trajectory per pair, seeds derived from `seed`.
template <typename Real>
std::vector<KlRecord> collect_kl_records(const model::ModelParams<Real>& params,
                                         std::span<const task::ModalPair> pairs,
                                         double temperature, std::size_t max_len,
                                         std::uint64_t seed);

// One JSON object per trajectory: {prompt_id, tokens, d, reward}.
struct TrajectoryDump {
  std::uint64_t prompt_id = 0;
  std::vector<int> tokens;
  std::vector<double> divergences;
  double reward = 0;
};

void write_trajectories(std::span<const TrajectoryDump> dumps, const std::filesystem::path& path);
std::vector<TrajectoryDump> read_trajectories(const std::filesystem::path& path);
std::vector<KlRecord> records_from_dumps(std::span<const TrajectoryDump> dumps);

}  // namespace cord::eval
