#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cord/autodiff/tensor.hpp"

namespace cord::ad {

struct AdamWConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay:
//   p <- p * (1 - lr * wd) - lr * mhat / (sqrt(vhat) + eps)
// Moment buffers are created on the first step and mirror parameter shapes.
template <typename Real>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>* const> grads);

  std::uint64_t steps() const { return steps_; }
  const AdamWConfig& config() const { return config_; }
  AdamWConfig& config() { return config_; }

  const std::vector<Tensor<Real>>& first_moments() const { return m_; }
  const std::vector<Tensor<Real>>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<Real>> m_;
  std::vector<Tensor<Real>> v_;
};

}  // namespace cord::ad
