#include "cord/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cord/common/error.hpp"
#include "cord/common/rng.hpp"

namespace cord::ad {
namespace {

template <typename Real>
double evaluate(const LossBuilder<Real>& build, std::span<const ParamRef<Real>> params) {
  Graph<Real> g(false);
  std::vector<Var<Real>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(g.leaf(*p.value, nullptr));
  return static_cast<double>(build(g, leaves).item());
}

template <typename Real>
std::vector<Tensor<Real>> analytic(const LossBuilder<Real>& build,
                                   std::span<const ParamRef<Real>> params, double& loss) {
  std::vector<Tensor<Real>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.value->shape);
  Graph<Real> g;
  std::vector<Var<Real>> leaves;
  for (std::size_t k = 0; k < params.size(); ++k) leaves.push_back(g.leaf(*params[k].value, &grads[k]));
  Var<Real> root = build(g, leaves);
  loss = static_cast<double>(root.item());
  g.backward(root);
  return grads;
}

// Derivative of `build` along element i of `values`.
template <typename Real>
double numeric(const LossBuilder<Real>& build, std::span<const ParamRef<Real>> params,
               std::vector<Real>& values, std::size_t i, const GradCheckOptions& o) {
  const Real saved = values[i];
  auto at = [&](double offset) {
    values[i] = static_cast<Real>(static_cast<double>(saved) + offset);
    const double v = evaluate(build, params);
    values[i] = saved;
    return v;
  };
  const double h = o.eps;
  if (o.stencil == Stencil::kFivePoint) {
    return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
  }
  // actual step after rounding to Real
  const double step = static_cast<double>(static_cast<Real>(static_cast<double>(saved) + h)) -
                      static_cast<double>(static_cast<Real>(static_cast<double>(saved) - h));
  return (at(h) - at(-h)) / step;
}

template <typename Real, typename Ref>
GradCheckReport compare(const std::vector<Tensor<Real>>& grads, double loss,
                        const LossBuilder<Ref>& reference, std::span<const ParamRef<Ref>> ref_params,
                        std::span<const std::string> names, const GradCheckOptions& options) {
  GradCheckReport report;
  report.loss = loss;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < ref_params.size(); ++k) {
    auto& values = ref_params[k].value->data;
    std::vector<std::size_t> indices(values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_elements != 0 && indices.size() > options.max_elements) {
      std::shuffle(indices.begin(), indices.end(), rng.engine());
      indices.resize(options.max_elements);
      std::sort(indices.begin(), indices.end());
    }

    GradCheckEntry entry;
    entry.name = names[k];
    entry.checked = indices.size();
    for (std::size_t i : indices) {
      const double num = numeric(reference, ref_params, values, i, options);
      const double ana = static_cast<double>(grads[k].data[i]);
      const double abs_err = std::abs(ana - num);
      const double denom = std::max({std::abs(ana), std::abs(num), options.rel_floor});
      const double rel = abs_err / denom;
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      if (rel >= entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = ana;
        entry.numeric = num;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

template <typename Real>
void require_deterministic(const LossBuilder<Real>& build, std::span<const ParamRef<Real>> params,
                           double loss) {
  if (evaluate(build, params) != loss || evaluate(build, params) != loss) {
    throw Error("grad_check: loss builder is not deterministic");
  }
}

}  // namespace

std::string GradCheckReport::to_string(double tolerance) const {
  std::ostringstream out;
  out.precision(3);
  for (const auto& e : entries) {
    out << (e.max_rel_error <= tolerance ? "ok   " : "FAIL ") << e.name << ": checked "
        << e.checked << ", max rel " << std::scientific << e.max_rel_error << ", max abs "
        << e.max_abs_error << " (analytic " << e.analytic << " vs numeric " << e.numeric
        << " at " << e.worst_index << ")" << std::defaultfloat << "\n";
  }
  return out.str();
}

template <typename Real>
GradCheckReport grad_check(const LossBuilder<Real>& build, std::span<const ParamRef<Real>> params,
                           const GradCheckOptions& options) {
  double loss = 0;
  const auto grads = analytic(build, params, loss);
  require_deterministic(build, params, loss);
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p.name);
  return compare<Real, Real>(grads, loss, build, params, names, options);
}

template <typename Real>
GradCheckReport grad_check_against(const LossBuilder<Real>& build,
                                   std::span<const ParamRef<Real>> params,
                                   const LossBuilder<double>& reference,
                                   std::span<const ParamRef<double>> reference_params,
                                   const GradCheckOptions& options) {
  if (params.size() != reference_params.size()) {
    throw ShapeError("grad_check_against: parameter lists differ in length");
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& src = *params[k].value;
    auto& dst = *reference_params[k].value;
    if (src.shape != dst.shape) {
      throw ShapeError("grad_check_against: shape mismatch for " + params[k].name);
    }
    for (std::size_t i = 0; i < src.data.size(); ++i) dst.data[i] = static_cast<double>(src.data[i]);
    names.push_back(params[k].name);
  }
  double loss = 0;
  const auto grads = analytic(build, params, loss);
  double ref_loss = 0;
  analytic(reference, reference_params, ref_loss);
  require_deterministic(reference, reference_params, ref_loss);
  return compare<Real, double>(grads, loss, reference, reference_params, names, options);
}

template GradCheckReport grad_check<float>(const LossBuilder<float>&, std::span<const ParamRef<float>>,
                                           const GradCheckOptions&);
template GradCheckReport grad_check<double>(const LossBuilder<double>&,
                                            std::span<const ParamRef<double>>,
                                            const GradCheckOptions&);
template GradCheckReport grad_check_against<float>(const LossBuilder<float>&,
                                                   std::span<const ParamRef<float>>,
                                                   const LossBuilder<double>&,
                                                   std::span<const ParamRef<double>>,
                                                   const GradCheckOptions&);

}  // namespace cord::ad
