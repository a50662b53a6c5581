#include "cord/eval/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cord/align/seq_align.hpp"
#include "cord/align/token_align.hpp"
#include "cord/common/error.hpp"
#include "cord/common/parallel.hpp"
#include "cord/common/rng.hpp"
#include "cord/rollout/rollout.hpp"

namespace cord::eval {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  if (!(q >= 0 && q <= 100)) throw ConfigError("percentile q must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // smallest rank r with 100 r >= q n; q/100 alone rounds 33.3% of 10000 up to 3331
  const double qn = q * static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(qn / 100.0));
  while (rank > 0 && 100.0 * static_cast<double>(rank - 1) >= qn) --rank;
  while (100.0 * static_cast<double>(rank) < qn) ++rank;
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Histogram histogram(std::span<const double> values, std::size_t bins, bool log_scale,
                    double floor) {
  if (values.empty()) throw ConfigError("histogram of an empty set");
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it;
  const double hi = *hi_it;
  Histogram h;
  h.edges.resize(bins + 1);
  if (log_scale) {
    if (!(floor > 0)) throw ConfigError("log histogram floor must be positive");
    lo = std::max(lo, floor);
    const double top = std::max(hi, lo);
    const double llo = std::log(lo), lhi = std::log(top);
    for (std::size_t i = 0; i <= bins; ++i) {
      h.edges[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(bins));
    }
    h.edges.front() = lo;
    h.edges.back() = top;
  } else {
    for (std::size_t i = 0; i <= bins; ++i) {
      h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.edges.back() = hi;
  }
  h.counts.assign(bins, 0);
  for (double v : values) {
    // first edge strictly greater than v, minus one
    const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    std::size_t bin = it == h.edges.begin() ? 0 : static_cast<std::size_t>(it - h.edges.begin()) - 1;
    bin = std::min(bin, bins - 1);
    ++h.counts[bin];
  }
  return h;
}

std::string Histogram::to_csv() const {
  std::ostringstream out;
  out << "bin_edge,count\n";
  char buf[64];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%zu\n", edges[i], counts[i]);
    out << buf;
  }
  return out.str();
}

KlHistogram kl_histogram(std::span<const KlRecord> records, std::size_t bins, double q,
                         bool log_scale) {
  if (records.empty()) throw ConfigError("kl_histogram: no records");
  std::vector<double> d;
  d.reserve(records.size());
  for (const auto& r : records) d.push_back(r.divergence);
  KlHistogram out;
  out.histogram = histogram(d, bins, log_scale);
  out.q = q;
  out.threshold = percentile(d, q);
  out.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  out.median = percentile(d, 50);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson: length mismatch");
  if (x.size() < 2) throw ConfigError("pearson needs at least 2 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw ConfigError("pearson undefined for zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double position_correlation(std::span<const KlRecord> records) {
  std::vector<double> t, d;
  for (const auto& r : records) {
    t.push_back(static_cast<double>(r.position));
    d.push_back(r.divergence);
  }
  return pearson(t, d);
}

namespace {

std::vector<std::pair<int, std::size_t>> ranked(const std::map<int, std::size_t>& counts) {
  std::vector<std::pair<int, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace

TokenFrequency token_frequency_by_kl(std::span<const KlRecord> records, double q) {
  TokenFrequency out;
  if (records.empty()) return out;
  std::vector<double> d;
  for (const auto& r : records) d.push_back(r.divergence);
  out.threshold = percentile(d, q);
  std::map<int, std::size_t> high, low;
  for (const auto& r : records) ++(r.divergence > out.threshold ? high : low)[r.token];
  out.high = ranked(high);
  out.low = ranked(low);
  return out;
}

template <typename Real>
std::vector<KlRecord> collect_kl_records(const model::ModelParams<Real>& params,
                                         std::span<const task::ModalPair> pairs,
                                         double temperature, std::size_t max_len,
                                         std::uint64_t seed) {
  std::vector<std::vector<KlRecord>> per(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    rollout::RolloutOptions o;
    o.temperature = temperature;
    o.max_len = max_len;
    o.record_teacher = true;
    o.seed = derive_seed(seed, Stream::kAnalysis, pairs[i].id);
    auto traj = rollout::sample_rollout(params, pairs[i], o);
    const auto d = align::trajectory_divergences(traj);
    const auto answer = align::extract_answer(traj.tokens);
    const bool correct = answer && *answer == pairs[i].instance.answer;
    for (std::size_t t = 0; t < d.size(); ++t) {
      per[i].push_back({pairs[i].id, t + 1, d.size(), d[t], traj.tokens[t], correct});
    }
  });
  std::vector<KlRecord> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

void write_trajectories(std::span<const TrajectoryDump> dumps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trajectory dump", path.string());
  for (const auto& t : dumps) {
    nlohmann::json j;
    j["prompt_id"] = t.prompt_id;
    j["tokens"] = t.tokens;
    j["d"] = t.divergences;
    j["reward"] = t.reward;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing trajectory dump", path.string());
}

std::vector<TrajectoryDump> read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory dump", path.string());
  std::vector<TrajectoryDump> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TrajectoryDump t;
      t.prompt_id = j.at("prompt_id").get<std::uint64_t>();
      t.tokens = j.at("tokens").get<std::vector<int>>();
      t.divergences = j.at("d").get<std::vector<double>>();
      t.reward = j.at("reward").get<double>();
      if (t.divergences.size() != t.tokens.size()) throw ConfigError("tokens and d differ in length");
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed trajectory record at line " + std::to_string(lineno) + ": " + e.what(),
                    path.string());
    }
  }
  return out;
}

std::vector<KlRecord> records_from_dumps(std::span<const TrajectoryDump> dumps) {
  std::vector<KlRecord> out;
  for (const auto& t : dumps) {
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      out.push_back({t.prompt_id, i + 1, t.tokens.size(), t.divergences[i], t.tokens[i], t.reward > 0});
    }
  }
  return out;
}

template std::vector<KlRecord> collect_kl_records<float>(const model::ModelParams<float>&,
                                                         std::span<const task::ModalPair>, double,
                                                         std::size_t, std::uint64_t);
template std::vector<KlRecord> collect_kl_records<double>(const model::ModelParams<double>&,
                                                          std::span<const task::ModalPair>, double,
                                                          std::size_t, std::uint64_t);

}  // namespace cord::eval
