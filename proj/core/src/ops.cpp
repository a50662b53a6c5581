#include "cord/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace cord::ad {
namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

template <typename Real>
ConstMatMap<Real> as_mat(const Tensor<Real>& t) {
  return ConstMatMap<Real>(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                           static_cast<Eigen::Index>(t.cols()));
}

template <typename Real>
MatMap<Real> as_mat(Tensor<Real>& t) {
  return MatMap<Real>(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                      static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

// The detail message is only built on failure.
#define CORD_REQUIRE(ok, op, detail) \
  do {                               \
    if (!(ok)) fail(op, detail);     \
  } while (0)

template <typename Real>
void require_matrix(const Tensor<Real>& t, const char* op) {
  CORD_REQUIRE(t.rank() == 2, op, "expected rank-2 operand, got " + shape_string(t.shape));
}

template <typename Real>
void require_same(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  CORD_REQUIRE(a.shape == b.shape, op,
          "shape mismatch " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

template <typename Real>
void accumulate(Tensor<Real>& into, const Tensor<Real>& from) {
  for (std::size_t i = 0; i < into.data.size(); ++i) into.data[i] += from.data[i];
}

template <typename Real>
Graph<Real>& graph_of(Var<Real> v, const char* op) {
  CORD_REQUIRE(v.valid(), op, "invalid operand");
  return *v.graph();
}

}  // namespace

namespace kernels {

template <typename Real>
void log_softmax_row(std::span<const Real> in, std::span<Real> out) {
  const Real mx = *std::max_element(in.begin(), in.end());
  Real total = 0;
  for (Real v : in) total += std::exp(v - mx);
  const Real lse = mx + std::log(total);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lse;
}

template <typename Real>
Real gelu(Real x) {
  const Real c = static_cast<Real>(std::sqrt(2.0 / std::numbers::pi));
  const Real u = c * (x + Real(0.044715) * x * x * x);
  return Real(0.5) * x * (Real(1) + std::tanh(u));
}

template <typename Real>
Real gelu_grad(Real x) {
  const Real c = static_cast<Real>(std::sqrt(2.0 / std::numbers::pi));
  const Real u = c * (x + Real(0.044715) * x * x * x);
  const Real t = std::tanh(u);
  return Real(0.5) * (Real(1) + t) +
         Real(0.5) * x * (Real(1) - t * t) * c * (Real(1) + Real(3 * 0.044715) * x * x);
}

template <typename Real>
void layer_norm_row(std::span<const Real> in, std::span<const Real> gain,
                    std::span<const Real> bias, Real eps, std::span<Real> out) {
  const std::size_t n = in.size();
  Real mu = 0;
  for (Real v : in) mu += v;
  mu /= static_cast<Real>(n);
  Real var = 0;
  for (Real v : in) var += (v - mu) * (v - mu);
  var /= static_cast<Real>(n);
  const Real inv = Real(1) / std::sqrt(var + eps);
  for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - mu) * inv * gain[i] + bias[i];
}

template <typename Real>
void vec_mat(std::span<const Real> in, const Tensor<Real>& w, std::span<Real> out) {
  Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> x(
      in.data(), static_cast<Eigen::Index>(in.size()));
  Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>> y(
      out.data(), static_cast<Eigen::Index>(out.size()));
  y.noalias() = x * as_mat(w);
}

}  // namespace kernels

template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  constexpr const char* op = "matmul";
  Graph<Real>& g = graph_of(a, op);
  const Tensor<Real>& av = a.value();
  const Tensor<Real>& bv = b.value();
  require_matrix(av, op);
  require_matrix(bv, op);
  CORD_REQUIRE(av.cols() == bv.rows(), op,
          "inner dims " + shape_string(av.shape) + " x " + shape_string(bv.shape));
  Tensor<Real> out(Shape{av.rows(), bv.cols()});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return g.emit(op, std::move(out), {a, b}, [ia, ib](Graph<Real>& gr, const Tensor<Real>& go) {
    if (gr.requires_grad(ia)) {
      as_mat(gr.grad(ia)).noalias() += as_mat(go) * as_mat(gr.value(ib)).transpose();
    }
    if (gr.requires_grad(ib)) {
      as_mat(gr.grad(ib)).noalias() += as_mat(gr.value(ia)).transpose() * as_mat(go);
    }
  });
}

template <typename Real>
Var<Real> matmul_bt(Var<Real> a, Var<Real> b) {
  constexpr const char* op = "matmul_bt";
  Graph<Real>& g = graph_of(a, op);
  const Tensor<Real>& av = a.value();
  const Tensor<Real>& bv = b.value();
  require_matrix(av, op);
  require_matrix(bv, op);
  CORD_REQUIRE(av.cols() == bv.cols(), op,
          "inner dims " + shape_string(av.shape) + " x " + shape_string(bv.shape) + "^T");
  Tensor<Real> out(Shape{av.rows(), bv.rows()});
  as_mat(out).noalias() = as_mat(av) * as_mat(bv).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return g.emit(op, std::move(out), {a, b}, [ia, ib](Graph<Real>& gr, const Tensor<Real>& go) {
    if (gr.requires_grad(ia)) {
      as_mat(gr.grad(ia)).noalias() += as_mat(go) * as_mat(gr.value(ib));
    }
    if (gr.requires_grad(ib)) {
      as_mat(gr.grad(ib)).noalias() += as_mat(go).transpose() * as_mat(gr.value(ia));
    }
  });
}

template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  constexpr const char* op = "add";
  Graph<Real>& g = graph_of(a, op);
  require_same(a.value(), b.value(), op);
  Tensor<Real> out = a.value();
  out.requires_grad = false;
  accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return g.emit(op, std::move(out), {a, b}, [ia, ib](Graph<Real>& gr, const Tensor<Real>& go) {
    if (gr.requires_grad(ia)) accumulate(gr.grad(ia), go);
    if (gr.requires_grad(ib)) accumulate(gr.grad(ib), go);
  });
}

template <typename Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  constexpr const char* op = "sub";
  Graph<Real>& g = graph_of(a, op);
  require_same(a.value(), b.value(), op);
  Tensor<Real> out(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.emit(op, std::move(out), {a, b}, [ia, ib](Graph<Real>& gr, const Tensor<Real>& go) {
    if (gr.requires_grad(ia)) accumulate(gr.grad(ia), go);
    if (gr.requires_grad(ib)) {
      auto& gb = gr.grad(ib).data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go.data[i];
    }
  });
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  constexpr const char* op = "mul";
  Graph<Real>& g = graph_of(a, op);
  require_same(a.value(), b.value(), op);
  Tensor<Real> out(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.emit(op, std::move(out), {a, b}, [ia, ib](Graph<Real>& gr, const Tensor<Real>& go) {
    const auto& x = gr.value(ia).data;
    const auto& y = gr.value(ib).data;
    if (gr.requires_grad(ia)) {
      auto& ga = gr.grad(ia).data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go.data[i] * y[i];
    }
    if (gr.requires_grad(ib)) {
      auto& gb = gr.grad(ib).data;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go.data[i] * x[i];
    }
  });
}

template <typename Real>
Var<Real> scale(Var<Real> x, Real factor) {
  constexpr const char* op = "scale";
  Graph<Real>& g = graph_of(x, op);
  Tensor<Real> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = xv[i] * factor;
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x}, [ix, factor](Graph<Real>& gr, const Tensor<Real>& go) {
    auto& gx = gr.grad(ix).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go.data[i] * factor;
  });
}

template <typename Real>
Var<Real> exp(Var<Real> x) {
  constexpr const char* op = "exp";
  Graph<Real>& g = graph_of(x, op);
  Tensor<Real> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(xv[i]);
  const std::size_t ix = x.id();
  const std::size_t iout = g.size();
  return g.emit(op, std::move(out), {x}, [ix, iout](Graph<Real>& gr, const Tensor<Real>& go) {
    const auto& y = gr.value(iout).data;
    auto& gx = gr.grad(ix).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go.data[i] * y[i];
  });
}

template <typename Real>
Var<Real> gelu(Var<Real> x) {
  constexpr const char* op = "gelu";
  Graph<Real>& g = graph_of(x, op);
  Tensor<Real> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = kernels::gelu(xv[i]);
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x}, [ix](Graph<Real>& gr, const Tensor<Real>& go) {
    const auto& v = gr.value(ix).data;
    auto& gx = gr.grad(ix).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go.data[i] * kernels::gelu_grad(v[i]);
  });
}

template <typename Real>
Var<Real> add_row(Var<Real> x, Var<Real> bias) {
  constexpr const char* op = "add_row";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  const Tensor<Real>& bv = bias.value();
  CORD_REQUIRE(bv.numel() == xv.cols(), op,
          "bias " + shape_string(bv.shape) + " vs rows of " + shape_string(xv.shape));
  Tensor<Real> out = xv;
  out.requires_grad = false;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out.data[r * n + c] += bv.data[c];
  const std::size_t ix = x.id(), ib = bias.id();
  return g.emit(op, std::move(out), {x, bias}, [ix, ib, n](Graph<Real>& gr, const Tensor<Real>& go) {
    if (gr.requires_grad(ix)) accumulate(gr.grad(ix), go);
    if (gr.requires_grad(ib)) {
      auto& gb = gr.grad(ib).data;
      for (std::size_t i = 0; i < go.data.size(); ++i) gb[i % n] += go.data[i];
    }
  });
}

template <typename Real>
Var<Real> gather_rows(Var<Real> table, std::span<const int> ids) {
  constexpr const char* op = "gather_rows";
  Graph<Real>& g = graph_of(table, op);
  const Tensor<Real>& tv = table.value();
  require_matrix(tv, op);
  const std::size_t d = tv.cols();
  Tensor<Real> out(Shape{ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    CORD_REQUIRE(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < tv.rows(), op,
            "row id " + std::to_string(ids[r]) + " out of range " + std::to_string(tv.rows()));
    std::copy_n(tv.data.begin() + static_cast<std::ptrdiff_t>(ids[r] * d), d,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const std::size_t it = table.id();
  return g.emit(op, std::move(out), {table},
                [it, d, idx = std::move(idx)](Graph<Real>& gr, const Tensor<Real>& go) {
                  auto& gt = gr.grad(it).data;
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    for (std::size_t c = 0; c < d; ++c)
                      gt[static_cast<std::size_t>(idx[r]) * d + c] += go.data[r * d + c];
                });
}

template <typename Real>
Var<Real> pick(Var<Real> x, std::span<const int> ids) {
  constexpr const char* op = "pick";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  CORD_REQUIRE(xv.rows() == ids.size(), op, "one index per row required");
  const std::size_t n = xv.cols();
  Tensor<Real> out(Shape{ids.size()});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    CORD_REQUIRE(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < n, op,
            "column id " + std::to_string(ids[r]) + " out of range");
    out.data[r] = xv.data[r * n + static_cast<std::size_t>(ids[r])];
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x},
                [ix, n, idx = std::move(idx)](Graph<Real>& gr, const Tensor<Real>& go) {
                  auto& gx = gr.grad(ix).data;
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    gx[r * n + static_cast<std::size_t>(idx[r])] += go.data[r];
                });
}

template <typename Real>
Var<Real> concat_rows(std::span<const Var<Real>> parts) {
  constexpr const char* op = "concat_rows";
  CORD_REQUIRE(!parts.empty(), op, "no operands");
  Graph<Real>& g = graph_of(parts[0], op);
  const std::size_t n = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    CORD_REQUIRE(p.cols() == n, op,
            "column mismatch: " + shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()));
    rows += p.rows();
  }
  Tensor<Real> out(Shape{rows, n});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    const auto& src = p.value().data;
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at));
    ids.push_back(p.id());
    offsets.push_back(at);
    at += src.size();
  }
  return g.emit(op, std::move(out), parts,
                [ids = std::move(ids), offsets = std::move(offsets)](Graph<Real>& gr,
                                                                     const Tensor<Real>& go) {
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (!gr.requires_grad(ids[k])) continue;
                    auto& gp = gr.grad(ids[k]).data;
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go.data[offsets[k] + i];
                  }
                });
}

template <typename Real>
Var<Real> concat_cols(std::span<const Var<Real>> parts) {
  constexpr const char* op = "concat_cols";
  CORD_REQUIRE(!parts.empty(), op, "no operands");
  Graph<Real>& g = graph_of(parts[0], op);
  const std::size_t m = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    CORD_REQUIRE(p.rows() == m, op, "row mismatch");
    cols += p.cols();
  }
  Tensor<Real> out(Shape{m, cols});
  std::vector<std::size_t> ids, offsets, widths;
  std::size_t at = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * cols + at));
    ids.push_back(p.id());
    offsets.push_back(at);
    widths.push_back(w);
    at += w;
  }
  return g.emit(op, std::move(out), parts,
                [ids = std::move(ids), offsets = std::move(offsets), widths = std::move(widths), m,
                 cols](Graph<Real>& gr, const Tensor<Real>& go) {
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (!gr.requires_grad(ids[k])) continue;
                    auto& gp = gr.grad(ids[k]).data;
                    const std::size_t w = widths[k];
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < w; ++c)
                        gp[r * w + c] += go.data[r * cols + offsets[k] + c];
                  }
                });
}

template <typename Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t count) {
  constexpr const char* op = "slice_rows";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  require_matrix(xv, op);
  CORD_REQUIRE(begin + count <= xv.rows(), op, "row range out of bounds");
  const std::size_t n = xv.cols();
  Tensor<Real> out(Shape{count, n});
  std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * n), count * n, out.data.begin());
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x}, [ix, begin, n](Graph<Real>& gr, const Tensor<Real>& go) {
    auto& gx = gr.grad(ix).data;
    for (std::size_t i = 0; i < go.data.size(); ++i) gx[begin * n + i] += go.data[i];
  });
}

template <typename Real>
Var<Real> slice_cols(Var<Real> x, std::size_t begin, std::size_t count) {
  constexpr const char* op = "slice_cols";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  require_matrix(xv, op);
  CORD_REQUIRE(begin + count <= xv.cols(), op, "column range out of bounds");
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor<Real> out(Shape{m, count});
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(r * n + begin), count,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * count));
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x},
                [ix, begin, count, m, n](Graph<Real>& gr, const Tensor<Real>& go) {
                  auto& gx = gr.grad(ix).data;
                  for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < count; ++c)
                      gx[r * n + begin + c] += go.data[r * count + c];
                });
}

template <typename Real>
Var<Real> causal_softmax(Var<Real> scores, std::size_t offset) {
  constexpr const char* op = "causal_softmax";
  Graph<Real>& g = graph_of(scores, op);
  const Tensor<Real>& sv = scores.value();
  require_matrix(sv, op);
  const std::size_t m = sv.rows(), n = sv.cols();
  Tensor<Real> out(Shape{m, n});
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t visible = std::min(n, r + offset + 1);
    const Real* in = sv.data.data() + r * n;
    Real* o = out.data.data() + r * n;
    const Real mx = *std::max_element(in, in + visible);
    Real total = 0;
    for (std::size_t c = 0; c < visible; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < visible; ++c) o[c] /= total;
  }
  const std::size_t is = scores.id();
  const std::size_t iout = g.size();
  return g.emit(op, std::move(out), {scores}, [is, iout, m, n](Graph<Real>& gr, const Tensor<Real>& go) {
    const auto& a = gr.value(iout).data;
    auto& gs = gr.grad(is).data;
    for (std::size_t r = 0; r < m; ++r) {
      Real dot = 0;
      for (std::size_t c = 0; c < n; ++c) dot += a[r * n + c] * go.data[r * n + c];
      for (std::size_t c = 0; c < n; ++c)
        gs[r * n + c] += a[r * n + c] * (go.data[r * n + c] - dot);
    }
  });
}

template <typename Real>
Var<Real> log_softmax(Var<Real> logits) {
  constexpr const char* op = "log_softmax";
  Graph<Real>& g = graph_of(logits, op);
  const Tensor<Real>& lv = logits.value();
  CORD_REQUIRE(lv.rank() >= 1, op, "rank-0 input");
  if (!all_finite<Real>(lv.data)) throw NumericError(std::string(op) + ": non-finite logits");
  const std::size_t m = lv.rows(), n = lv.cols();
  Tensor<Real> out(lv.shape);
  for (std::size_t r = 0; r < m; ++r) kernels::log_softmax_row<Real>(lv.row(r), out.row(r));
  const std::size_t il = logits.id();
  const std::size_t iout = g.size();
  return g.emit(op, std::move(out), {logits}, [il, iout, m, n](Graph<Real>& gr, const Tensor<Real>& go) {
    const auto& y = gr.value(iout).data;
    auto& gl = gr.grad(il).data;
    for (std::size_t r = 0; r < m; ++r) {
      Real total = 0;
      for (std::size_t c = 0; c < n; ++c) total += go.data[r * n + c];
      for (std::size_t c = 0; c < n; ++c)
        gl[r * n + c] += go.data[r * n + c] - std::exp(y[r * n + c]) * total;
    }
  });
}

template <typename Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gain, Var<Real> bias, Real eps) {
  constexpr const char* op = "layer_norm";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  CORD_REQUIRE(gain.value().numel() == n && bias.value().numel() == n, op, "gain/bias width mismatch");
  Tensor<Real> out(xv.shape);
  std::vector<Real> xhat(m * n), inv_std(m);
  const auto& gv = gain.value().data;
  const auto& bv = bias.value().data;
  for (std::size_t r = 0; r < m; ++r) {
    const Real* in = xv.data.data() + r * n;
    Real mu = 0;
    for (std::size_t c = 0; c < n; ++c) mu += in[c];
    mu /= static_cast<Real>(n);
    Real var = 0;
    for (std::size_t c = 0; c < n; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<Real>(n);
    inv_std[r] = Real(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (in[c] - mu) * inv_std[r];
      out.data[r * n + c] = xhat[r * n + c] * gv[c] + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.emit(op, std::move(out), {x, gain, bias},
                [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Graph<Real>& gr, const Tensor<Real>& go) {
                  const auto& gv = gr.value(ig).data;
                  if (gr.requires_grad(ig)) {
                    auto& gg = gr.grad(ig).data;
                    for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += go.data[i] * xhat[i];
                  }
                  if (gr.requires_grad(ib)) {
                    auto& gb = gr.grad(ib).data;
                    for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += go.data[i];
                  }
                  if (gr.requires_grad(ix)) {
                    auto& gx = gr.grad(ix).data;
                    for (std::size_t r = 0; r < m; ++r) {
                      Real mean_d = 0, mean_dx = 0;
                      for (std::size_t c = 0; c < n; ++c) {
                        const Real d = go.data[r * n + c] * gv[c];
                        mean_d += d;
                        mean_dx += d * xhat[r * n + c];
                      }
                      mean_d /= static_cast<Real>(n);
                      mean_dx /= static_cast<Real>(n);
                      for (std::size_t c = 0; c < n; ++c) {
                        const Real d = go.data[r * n + c] * gv[c];
                        gx[r * n + c] += inv_std[r] * (d - mean_d - xhat[r * n + c] * mean_dx);
                      }
                    }
                  }
                });
}

template <typename Real>
Var<Real> sum(Var<Real> x) {
  constexpr const char* op = "sum";
  Graph<Real>& g = graph_of(x, op);
  Real total = 0;
  for (Real v : x.value().data) total += v;
  const std::size_t ix = x.id();
  return g.emit(op, Tensor<Real>::scalar(total), {x}, [ix](Graph<Real>& gr, const Tensor<Real>& go) {
    auto& gx = gr.grad(ix).data;
    for (auto& v : gx) v += go.data[0];
  });
}

template <typename Real>
Var<Real> mean(Var<Real> x) {
  constexpr const char* op = "mean";
  Graph<Real>& g = graph_of(x, op);
  const std::size_t n = x.value().numel();
  CORD_REQUIRE(n > 0, op, "empty input");
  Real total = 0;
  for (Real v : x.value().data) total += v;
  const std::size_t ix = x.id();
  return g.emit(op, Tensor<Real>::scalar(total / static_cast<Real>(n)), {x},
                [ix, n](Graph<Real>& gr, const Tensor<Real>& go) {
                  auto& gx = gr.grad(ix).data;
                  const Real share = go.data[0] / static_cast<Real>(n);
                  for (auto& v : gx) v += share;
                });
}

template <typename Real>
Var<Real> row_sum(Var<Real> x) {
  constexpr const char* op = "row_sum";
  Graph<Real>& g = graph_of(x, op);
  const Tensor<Real>& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor<Real> out(Shape{m});
  for (std::size_t r = 0; r < m; ++r) {
    Real total = 0;
    for (std::size_t c = 0; c < n; ++c) total += xv.data[r * n + c];
    out.data[r] = total;
  }
  const std::size_t ix = x.id();
  return g.emit(op, std::move(out), {x}, [ix, n](Graph<Real>& gr, const Tensor<Real>& go) {
    auto& gx = gr.grad(ix).data;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go.data[i / n];
  });
}

template <typename Real>
Var<Real> weighted_sum(Var<Real> x, std::span<const Real> weights) {
  constexpr const char* op = "weighted_sum";
  Graph<Real>& g = graph_of(x, op);
  const auto& xv = x.value().data;
  CORD_REQUIRE(xv.size() == weights.size(), op, "weight count mismatch");
  Real total = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += weights[i] * xv[i];
  std::vector<Real> w(weights.begin(), weights.end());
  const std::size_t ix = x.id();
  return g.emit(op, Tensor<Real>::scalar(total), {x},
                [ix, w = std::move(w)](Graph<Real>& gr, const Tensor<Real>& go) {
                  auto& gx = gr.grad(ix).data;
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go.data[0] * w[i];
                });
}

template <typename Real>
Var<Real> stop_gradient(Var<Real> x) {
  Graph<Real>& g = graph_of(x, "stop_gradient");
  Tensor<Real> copy = x.value();
  copy.requires_grad = false;
  return g.emit("stop_gradient", std::move(copy), std::span<const Var<Real>>{}, {});
}

#define CORD_INSTANTIATE_OPS(Real)                                                       \
  template Var<Real> matmul(Var<Real>, Var<Real>);                                       \
  template Var<Real> matmul_bt(Var<Real>, Var<Real>);                                    \
  template Var<Real> add(Var<Real>, Var<Real>);                                          \
  template Var<Real> sub(Var<Real>, Var<Real>);                                          \
  template Var<Real> mul(Var<Real>, Var<Real>);                                          \
  template Var<Real> scale(Var<Real>, Real);                                             \
  template Var<Real> exp(Var<Real>);                                                     \
  template Var<Real> gelu(Var<Real>);                                                    \
  template Var<Real> add_row(Var<Real>, Var<Real>);                                      \
  template Var<Real> gather_rows(Var<Real>, std::span<const int>);                       \
  template Var<Real> pick(Var<Real>, std::span<const int>);                              \
  template Var<Real> concat_rows(std::span<const Var<Real>>);                            \
  template Var<Real> concat_cols(std::span<const Var<Real>>);                            \
  template Var<Real> slice_rows(Var<Real>, std::size_t, std::size_t);                    \
  template Var<Real> slice_cols(Var<Real>, std::size_t, std::size_t);                    \
  template Var<Real> causal_softmax(Var<Real>, std::size_t);                             \
  template Var<Real> log_softmax(Var<Real>);                                             \
  template Var<Real> layer_norm(Var<Real>, Var<Real>, Var<Real>, Real);                  \
  template Var<Real> sum(Var<Real>);                                                     \
  template Var<Real> mean(Var<Real>);                                                    \
  template Var<Real> row_sum(Var<Real>);                                                 \
  template Var<Real> weighted_sum(Var<Real>, std::span<const Real>);                     \
  template Var<Real> stop_gradient(Var<Real>);                                           \
  template void kernels::log_softmax_row(std::span<const Real>, std::span<Real>);        \
  template Real kernels::gelu(Real);                                                     \
  template void kernels::layer_norm_row(std::span<const Real>, std::span<const Real>,    \
                                        std::span<const Real>, Real, std::span<Real>);   \
  template void kernels::vec_mat(std::span<const Real>, const Tensor<Real>&, std::span<Real>);

CORD_INSTANTIATE_OPS(float)
CORD_INSTANTIATE_OPS(double)

}  // namespace cord::ad
