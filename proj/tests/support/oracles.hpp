#pragma once

// Brute-force reference implementations for the analysis statistics. Written
// for clarity, not speed; shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cord/eval/analysis.hpp"

namespace cord::testing {

// smallest v such that at least q% of the values are <= v
inline double percentile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (100.0 * static_cast<double>(i + 1) >= q * static_cast<double>(v.size())) return v[i];
  }
  return v.back();
}

// linear scan over the edges
inline std::vector<std::size_t> histogram_oracle(const std::vector<double>& v,
                                                 const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  for (double x : v) {
    std::size_t bin = 0;
    for (std::size_t i = 0; i < bins; ++i) {
      if (x >= edges[i]) bin = i;
    }
    ++counts[bin];
  }
  return counts;
}

inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

using Tally = std::vector<std::pair<int, std::size_t>>;

inline std::pair<Tally, Tally> tally_oracle(const std::vector<eval::KlRecord>& records,
                                            double threshold) {
  std::unordered_map<int, std::size_t> hi, lo;
  for (const auto& r : records) (r.divergence > threshold ? hi : lo)[r.token] += 1;
  auto sorted = [](const std::unordered_map<int, std::size_t>& m) {
    Tally t(m.begin(), m.end());
    std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return t;
  };
  return {sorted(hi), sorted(lo)};
}

// Right-skewed synthetic divergences over 1-based positions.
inline std::vector<eval::KlRecord> synthetic_records(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<eval::KlRecord> out;
  std::uint64_t pid = 0;
  while (out.size() < n) {
    const std::size_t T = 1 + r.uniform_int(12);
    for (std::size_t t = 1; t <= T && out.size() < n; ++t) {
      eval::KlRecord k;
      k.prompt_id = pid;
      k.position = t;
      k.length = T;
      k.divergence = std::exp(1.5 * r.normal() - 2.0);
      k.token = static_cast<int>(r.uniform_int(38));
      k.correct = r.bernoulli(0.5);
      out.push_back(k);
    }
    ++pid;
  }
  return out;
}

}  // namespace cord::testing
