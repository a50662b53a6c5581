#pragma once

#include <cmath>
#include <vector>

#include "cord/common/rng.hpp"
#include "cord/model/params.hpp"
#include "cord/rollout/rollout.hpp"
#include "cord/task/dataset.hpp"

namespace cord::testing {

inline model::ModelConfig tiny_config(std::uint64_t seed = 3) {
  model::ModelConfig c;
  c.d_model = 16;
  c.layers = 2;
  c.heads = 2;
  c.context = 48;
  c.max_output = 12;
  c.seed = seed;
  return c;
}

template <typename Real>
model::ModelParams<Real> tiny_params(std::uint64_t seed = 3) {
  auto p = model::init_params<Real>(tiny_config(seed));
  // move gains and biases off their init values
  Rng r(seed * 977 + 1);
  for (auto& ref : p.named()) {
    for (auto& v : ref.value->data) v += static_cast<Real>(0.1 * r.normal());
  }
  return p;
}

inline task::ModalPair tiny_pair(std::uint64_t seed = 5, int length = 2) {
  const auto inst = task::generate_instance(length, 7, seed);
  return task::make_pair(seed, inst, task::NoiseSpec{0.2, 0.2, 1, 2, seed + 11});
}

// log-probabilities of a random distribution over n outcomes
inline std::vector<double> random_logp(Rng& r, std::size_t n, double spread = 2.0) {
  std::vector<double> z(n);
  double m = -1e300;
  for (auto& v : z) {
    v = spread * r.normal();
    m = std::max(m, v);
  }
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (auto& v : z) v -= lse;
  return z;
}

}  // namespace cord::testing
