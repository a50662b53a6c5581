#include <gtest/gtest.h>

#include <cmath>

#include "cord/autodiff/grad_check.hpp"
#include "cord/autodiff/ops.hpp"
#include "cord/common/rng.hpp"

namespace cord::ad {
namespace {

using T = Tensor<double>;

T random_tensor(Shape shape, Rng& r, double scale = 1.0) {
  T t(std::move(shape));
  for (auto& v : t.data) v = scale * r.normal();
  return t;
}

TEST(LogSoftmax, Examples) {
  Graph<double> g(false);
  auto a = log_softmax(g.constant(T({2}, {0.0, 0.0})));
  EXPECT_DOUBLE_EQ(a.value()[0], std::log(0.5));
  EXPECT_DOUBLE_EQ(a.value()[1], std::log(0.5));

  auto b = log_softmax(g.constant(T({3}, {4.2, 4.2, 4.2})));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(b.value()[i], std::log(1.0 / 3), 1e-15);

  // log(e^z / (e^1 + e^2)) evaluated by hand
  auto c = log_softmax(g.constant(T({2}, {1.0, 2.0})));
  EXPECT_NEAR(c.value()[0], -1.3132616875182228, 1e-14);
  EXPECT_NEAR(c.value()[1], -0.31326168751822286, 1e-14);
}

TEST(LogSoftmax, RejectsNonFinite) {
  Graph<double> g(false);
  EXPECT_THROW(log_softmax(g.constant(T({2}, {1.0, NAN}))), NumericError);
  EXPECT_THROW(log_softmax(g.constant(T({2}, {INFINITY, 0.0}))), NumericError);
}

TEST(LogSoftmax, LargeLogitsStable) {
  Graph<double> g(false);
  auto a = log_softmax(g.constant(T({3}, {1000.0, 1000.0, 999.0})));
  double s = 0;
  for (double v : a.value().data) s += std::exp(v);
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Backward, Square) {
  T x = T::scalar(3.0);
  T gx = T::scalar(0.0);
  Graph<double> g;
  auto v = g.leaf(x, &gx);
  g.backward(mul(v, v));
  EXPECT_DOUBLE_EQ(gx.item(), 6.0);
}

TEST(Backward, StopGradientBlocksUpstream) {
  Rng r(1);
  T x = random_tensor({4}, r), y = random_tensor({4}, r);
  T gx({4}), gy({4});
  Graph<double> g;
  auto vx = g.leaf(x, &gx);
  auto vy = g.leaf(y, &gy);
  g.backward(sum(mul(stop_gradient(vx), vy)));
  for (double v : gx.data) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(gy[i], x[i]);
}

TEST(Backward, NonScalarRootThrows) {
  T x({3}, 1.0), gx({3});
  Graph<double> g;
  auto v = g.leaf(x, &gx);
  EXPECT_THROW(g.backward(exp(v)), Error);
}

TEST(Backward, NonFiniteGradientThrows) {
  // (a b) c is finite but d/da = b c overflows in float
  using F = Tensor<float>;
  F a = F::scalar(1e-30f), b = F::scalar(1e20f), c = F::scalar(1e20f);
  F ga = F::scalar(0.f), gb = F::scalar(0.f), gc = F::scalar(0.f);
  Graph<float> g;
  auto root = mul(mul(g.leaf(a, &ga), g.leaf(b, &gb)), g.leaf(c, &gc));
  EXPECT_THROW(g.backward(root), NumericError);
}

TEST(Backward, AccumulatesWhenLeafReused) {
  T x = T::scalar(2.0), gx = T::scalar(0.0);
  Graph<double> g;
  auto v = g.leaf(x, &gx);
  g.backward(add(mul(v, v), scale(v, 3.0)));
  EXPECT_DOUBLE_EQ(gx.item(), 7.0);
}

TEST(Ops, ShapeErrors) {
  Graph<double> g(false);
  auto a = g.constant(T({2, 3}));
  auto b = g.constant(T({2, 3}));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, g.constant(T({3, 2}))), ShapeError);
  EXPECT_THROW(add_row(a, g.constant(T({2}))), ShapeError);
  const std::vector<double> w{1.0};
  EXPECT_THROW(weighted_sum(a, std::span<const double>(w)), ShapeError);
}

TEST(Ops, MatmulValues) {
  Graph<double> g(false);
  auto a = g.constant(T({2, 2}, {1, 2, 3, 4}));
  auto b = g.constant(T({2, 2}, {5, 6, 7, 8}));
  auto c = matmul(a, b);
  EXPECT_EQ(c.value().data, (std::vector<double>{19, 22, 43, 50}));
  auto d = matmul_bt(a, b);
  EXPECT_EQ(d.value().data, (std::vector<double>{17, 23, 39, 53}));
}

TEST(Ops, CausalSoftmaxMasksFuture) {
  Graph<double> g(false);
  auto s = causal_softmax(g.constant(T({2, 3}, {1, 2, 3, 4, 5, 6})));
  EXPECT_DOUBLE_EQ(s.value().at(0, 0), 1.0);
  EXPECT_EQ(s.value().at(0, 1), 0.0);
  EXPECT_EQ(s.value().at(1, 2), 0.0);
  EXPECT_NEAR(s.value().at(1, 0) + s.value().at(1, 1), 1.0, 1e-15);
}

// Random-input composites of every op against finite differences.
struct Fixture {
  std::vector<T> values;
  std::vector<ParamRef<double>> refs() {
    std::vector<ParamRef<double>> out;
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back({"p" + std::to_string(i), &values[i]});
    return out;
  }
};

void expect_fd(const LossBuilder<double>& build, Fixture& f, double tol = 1e-5) {
  GradCheckOptions o;
  o.eps = 1e-4;
  const auto refs = f.refs();
  const auto rep = grad_check<double>(build, refs, o);
  EXPECT_LE(rep.max_rel_error, tol) << rep.to_string(tol);
}

TEST(GradCheck, Matmul) {
  Rng r(2);
  Fixture f{{random_tensor({3, 4}, r), random_tensor({4, 2}, r), random_tensor({5, 4}, r)}};
  expect_fd([](Graph<double>&, std::span<const Var<double>> v) {
    auto a = matmul(v[0], v[1]);
    auto b = matmul_bt(v[0], v[2]);
    return add(sum(mul(a, a)), mean(mul(b, b)));
  }, f);
}

TEST(GradCheck, ElementwiseAndGelu) {
  Rng r(3);
  Fixture f{{random_tensor({3, 4}, r), random_tensor({3, 4}, r), random_tensor({4}, r)}};
  expect_fd([](Graph<double>&, std::span<const Var<double>> v) {
    auto x = add_row(sub(mul(v[0], v[1]), scale(v[1], 0.5)), v[2]);
    return sum(add(gelu(x), exp(scale(x, 0.3))));
  }, f);
}

TEST(GradCheck, LayerNormAndLogSoftmax) {
  Rng r(4);
  Fixture f{{random_tensor({3, 6}, r), random_tensor({6}, r), random_tensor({6}, r)}};
  expect_fd([](Graph<double>&, std::span<const Var<double>> v) {
    auto h = layer_norm(v[0], v[1], v[2]);
    const std::vector<int> ids{1, 5, 0};
    return scale(sum(pick(log_softmax(h), ids)), -1.0);
  }, f);
}

TEST(GradCheck, GatherSliceConcat) {
  Rng r(5);
  Fixture f{{random_tensor({5, 3}, r), random_tensor({2, 3}, r)}};
  expect_fd([](Graph<double>&, std::span<const Var<double>> v) {
    const std::vector<int> ids{4, 0, 4};
    auto rows = gather_rows(v[0], ids);
    std::vector<Var<double>> parts{rows, v[1]};
    auto all = concat_rows<double>(parts);
    auto left = slice_cols(all, 0, 2);
    auto right = slice_cols(all, 2, 1);
    std::vector<Var<double>> cols{right, left};
    auto sw = concat_cols<double>(cols);
    auto mid = slice_rows(sw, 1, 3);
    const std::vector<double> w{0.3, -1.2, 2.0};
    return add(weighted_sum(row_sum(mul(mid, mid)), std::span<const double>(w)), sum(mul(sw, all)));
  }, f);
}

TEST(GradCheck, CausalAttention) {
  Rng r(6);
  Fixture f{{random_tensor({4, 3}, r), random_tensor({4, 3}, r), random_tensor({4, 3}, r)}};
  expect_fd([](Graph<double>&, std::span<const Var<double>> v) {
    auto p = causal_softmax(scale(matmul_bt(v[0], v[1]), 0.5));
    auto o = matmul(p, v[2]);
    return sum(mul(o, o));
  }, f);
}

TEST(GradCheck, LinearSquaredLossClosedForm) {
  // L = sum (x w - y)^2, dL/dw = 2 x^T (x w - y)
  Rng r(7);
  T x = random_tensor({6, 3}, r), y = random_tensor({6, 1}, r);
  Fixture f{{random_tensor({3, 1}, r)}};
  auto build = [&](Graph<double>& g, std::span<const Var<double>> v) {
    auto e = sub(matmul(g.constant(x), v[0]), g.constant(y));
    return sum(mul(e, e));
  };
  GradCheckOptions o;
  o.eps = 1e-5;
  const auto refs = f.refs();
  const auto rep = grad_check<double>(build, refs, o);
  EXPECT_LE(rep.max_rel_error, 1e-10);

  T grad({3, 1});
  Graph<double> g;
  g.backward(build(g, std::vector<Var<double>>{g.leaf(f.values[0], &grad)}));
  for (std::size_t j = 0; j < 3; ++j) {
    double expect = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      double e = -y[i];
      for (std::size_t k = 0; k < 3; ++k) e += x.at(i, k) * f.values[0][k];
      expect += 2 * x.at(i, j) * e;
    }
    EXPECT_NEAR(grad[j], expect, 1e-12);
  }
}

TEST(GradCheck, ConstantParameterBothZero) {
  Rng r(8);
  Fixture f{{random_tensor({3}, r), random_tensor({3}, r)}};
  auto build = [](Graph<double>&, std::span<const Var<double>> v) { return sum(mul(v[0], v[0])); };
  const auto refs = f.refs();
  const auto rep = grad_check<double>(build, refs);
  ASSERT_EQ(rep.entries.size(), 2u);
  EXPECT_EQ(rep.entries[1].analytic, 0.0);
  EXPECT_EQ(rep.entries[1].numeric, 0.0);
  EXPECT_EQ(rep.entries[1].max_rel_error, 0.0);
}

TEST(GradCheck, RejectsNonDeterministicLoss) {
  Fixture f{{T({2}, {1.0, 2.0})}};
  int calls = 0;
  auto build = [&](Graph<double>& g, std::span<const Var<double>> v) {
    ++calls;
    return add(sum(v[0]), g.constant(T::scalar(calls * 1e-3)));
  };
  const auto refs = f.refs();
  EXPECT_THROW(grad_check<double>(build, refs), Error);
}

TEST(GradCheck, FloatAgainstDoubleReference) {
  Rng r(9);
  Tensor<float> a = random_tensor({3, 4}, r).cast<float>();
  Tensor<double> a64({3, 4});
  std::vector<ParamRef<float>> refs{{"a", &a}};
  std::vector<ParamRef<double>> refs64{{"a", &a64}};
  auto bf = [](Graph<float>&, std::span<const Var<float>> v) { return sum(gelu(log_softmax(v[0]))); };
  auto bd = [](Graph<double>&, std::span<const Var<double>> v) { return sum(gelu(log_softmax(v[0]))); };
  GradCheckOptions o;
  o.eps = 1e-5;
  o.rel_floor = 1e-3;
  const auto rep = grad_check_against<float>(bf, refs, bd, refs64, o);
  EXPECT_LE(rep.max_rel_error, 1e-3) << rep.to_string(1e-3);
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(T({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(T({2}).item(), ShapeError);
}

TEST(Tensor, AllFinite) {
  const std::vector<double> ok{1, -2, 0};
  const std::vector<double> bad{1, NAN};
  const std::vector<double> inf{1, -INFINITY};
  EXPECT_TRUE(all_finite<double>(ok));
  EXPECT_FALSE(all_finite<double>(bad));
  EXPECT_FALSE(all_finite<double>(inf));
}

}  // namespace
}  // namespace cord::ad
