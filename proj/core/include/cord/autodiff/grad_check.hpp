#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cord/autodiff/graph.hpp"

namespace cord::ad {

template <typename Real>
struct ParamRef {
  std::string name;
  Tensor<Real>* value = nullptr;
};

// Builds a scalar loss from leaves bound to the parameters, in order.
template <typename Real>
using LossBuilder = std::function<Var<Real>(Graph<Real>&, std::span<const Var<Real>>)>;

enum class Stencil : std::uint8_t {
  kCentral,    // (f(x+h) - f(x-h)) / 2h
  kFivePoint,  // (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h
};

struct GradCheckOptions {
  double eps = 1e-4;
  Stencil stencil = Stencil::kCentral;
  // |analytic - numeric| / max(|analytic|, |numeric|, rel_floor)
  double rel_floor = 1e-8;
  // 0 checks every element; otherwise a seeded subset per parameter.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  double max_abs_error = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  double loss = 0;

  bool passed(double tolerance) const { return max_rel_error <= tolerance; }
  std::string to_string(double tolerance) const;
};

// Compares reverse-mode gradients to central differences. Throws Error if
// the builder is not deterministic at the unperturbed point.
template <typename Real>
GradCheckReport grad_check(const LossBuilder<Real>& build,
                           std::span<const ParamRef<Real>> params,
                           const GradCheckOptions& options = {});

// Reverse-mode gradients of `build` (in Real) against finite differences of
// `reference`, a double-precision build of the same loss evaluated at the
// Real parameter values. Separates backprop error from the rounding noise of
// differencing a single-precision forward pass.
template <typename Real>
GradCheckReport grad_check_against(const LossBuilder<Real>& build,
                                   std::span<const ParamRef<Real>> params,
                                   const LossBuilder<double>& reference,
                                   std::span<const ParamRef<double>> reference_params,
                                   const GradCheckOptions& options = {});

}  // namespace cord::ad
