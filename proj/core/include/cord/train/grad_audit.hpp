#pragma once

#include <string>
#include <vector>

#include "cord/autodiff/grad_check.hpp"

namespace cord::train {

struct LossAudit {
  std::string loss;  // l_tok, l_seq, l_sft, l_fkl
  ad::GradCheckReport report;
};

struct AuditOptions {
  std::size_t d_model = 16;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::uint64_t seed = 7;
  // 0 checks every element of every parameter.
  std::size_t max_elements = 0;
  ad::GradCheckOptions check{};
};

// Checker settings used by the CLI and the acceptance suite. The relative
// error is |a - n| / max(|a|, |n|, floor); the floor sits above the
// differencing noise of each precision so exact zeros compare as equal.
inline constexpr double kF64Tolerance = 1e-5;
inline constexpr double kF32Tolerance = 1e-3;
inline const ad::GradCheckOptions kF64Check{1e-3, ad::Stencil::kFivePoint, 1e-6, 0, 0};
inline const ad::GradCheckOptions kF32Check{1e-5, ad::Stencil::kCentral, 1e-3, 0, 0};

// Finite-difference audit of the four training losses on a small model and
// one synthetic pair, with trajectories and teacher rollouts drawn once from
// the unperturbed parameters.
template <typename Real>
std::vector<LossAudit> audit_losses(const AuditOptions& options = {});

}  // namespace cord::train
