#include "cord/autodiff/optim.hpp"

#include <cmath>

namespace cord::ad {

template <typename Real>
void AdamW<Real>::step(std::span<Tensor<Real>* const> params,
                       std::span<const Tensor<Real>* const> grads) {
  if (params.size() != grads.size()) throw ShapeError("AdamW: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->shape);
      v_.emplace_back(p->shape);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("AdamW: parameter set changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape != grads[k]->shape || params[k]->shape != m_[k].shape) {
      throw ShapeError("AdamW: shape mismatch for parameter " + std::to_string(k) + ": " +
                       shape_string(params[k]->shape) + " vs grad " +
                       shape_string(grads[k]->shape));
    }
    if (!all_finite<Real>(grads[k]->data)) throw NumericError("AdamW: non-finite gradient");
  }

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const Real decay = static_cast<Real>(1.0 - config_.lr * config_.weight_decay);
  const Real lr = static_cast<Real>(config_.lr);
  const Real eps = static_cast<Real>(config_.eps);
  const Real rb1 = static_cast<Real>(b1), rb2 = static_cast<Real>(b2);
  const Real rc1 = static_cast<Real>(c1), rc2 = static_cast<Real>(c2);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->data;
    const auto& g = grads[k]->data;
    auto& m = m_[k].data;
    auto& v = v_[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = rb1 * m[i] + (Real(1) - rb1) * g[i];
      v[i] = rb2 * v[i] + (Real(1) - rb2) * g[i] * g[i];
      const Real mhat = m[i] / rc1;
      const Real vhat = v[i] / rc2;
      p[i] = p[i] * decay - lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace cord::ad
