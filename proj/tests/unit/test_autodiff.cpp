// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "stgsnas/autodiff.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/ops.hpp"
#include "stgsnas/tensor.hpp"

namespace stgsnas {
namespace {

using testing::op_gradcheck;
using testing::random_tensor;

constexpr double kGradTol = 1e-6;

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_numel(t.shape()), t.numel());
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor(Shape{}), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(t.reshaped({4}), DimensionError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW((void)t.item(), DimensionError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t = Tensor::vector({1.0, 2.0});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Matmul, IdentityAndScalar) {
  Tape tape;
  Var i2 = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var b = tape.constant(Tensor::matrix({{3, 4}, {5, 6}}));
  EXPECT_EQ(ad::matmul(i2, b).value(), Tensor::matrix({{3, 4}, {5, 6}}));
  Var two = tape.constant(Tensor::matrix({{2}}));
  Var three = tape.constant(Tensor::matrix({{3}}));
  EXPECT_EQ(ad::matmul(two, three).value(), Tensor::matrix({{6}}));
}

TEST(Matmul, ShapeMismatchIsDimensionError) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({2, 3}));
  EXPECT_THROW(ad::matmul(a, b), DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  const double err = op_gradcheck({random_tensor({3, 4}, 1), random_tensor({4, 2}, 2)},
                                  [](Tape&, std::span<const Var> v) { return ad::matmul(v[0], v[1]); });
  EXPECT_LT(err, kGradTol);
}

TEST(Softmax, AnalyticValues) {
  Tape tape;
  Var half = ad::softmax(tape.constant(Tensor::vector({0.0, 0.0})));
  EXPECT_DOUBLE_EQ(half.value()[0], 0.5);
  EXPECT_DOUBLE_EQ(half.value()[1], 0.5);
  Var q = ad::softmax(tape.constant(Tensor::vector({std::log(1.0), std::log(3.0)})));
  EXPECT_NEAR(q.value()[0], 0.25, 1e-15);
  EXPECT_NEAR(q.value()[1], 0.75, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Tape tape;
  Var s = ad::softmax(tape.constant(Tensor::vector({1000.0, 0.0})));
  ASSERT_TRUE(s.value().all_finite());
  // Reference by rescaling: exp(0 - 1000) / (1 + exp(-1000)).
  const double small = std::exp(-1000.0) / (1.0 + std::exp(-1000.0));
  EXPECT_EQ(s.value()[0], 1.0);
  EXPECT_EQ(s.value()[1], small);
}

TEST(Softmax, RowsLieOnSimplex) {
  Tape tape;
  Var s = ad::softmax(tape.constant(random_tensor({5, 7}, 3, -20, 20)));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      EXPECT_GE(s.value()[r * 7 + c], 0.0);
      total += s.value()[r * 7 + c];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Softmax, GradientBothAxes) {
  for (std::size_t axis : {0u, 1u}) {
    const double err = op_gradcheck({random_tensor({3, 4}, 4, -2, 2)},
                                    [axis](Tape&, std::span<const Var> v) { return ad::softmax(v[0], axis); });
    EXPECT_LT(err, kGradTol) << "axis " << axis;
  }
}

TEST(Elementwise, TrivialValues) {
  Tape tape;
  EXPECT_DOUBLE_EQ(ad::sigmoid(tape.constant(Tensor::scalar(0.0))).value().item(), 0.5);
  EXPECT_DOUBLE_EQ(ad::relu(tape.constant(Tensor::scalar(-3.0))).value().item(), 0.0);
  const Var parts[] = {tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({3}))};
  EXPECT_EQ(ad::concat(parts, 0).value(), Tensor::vector({1, 2, 3}));
  EXPECT_THROW(ad::log(tape.constant(Tensor::vector({1.0, 0.0}))), DomainError);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  const Tensor a = random_tensor({2, 3}, 10);
  const Tensor b = random_tensor({2, 3}, 11);
  const Tensor pos = random_tensor({2, 3}, 12, 0.5, 2.0);
  struct Case {
    const char* name;
    std::vector<Tensor> inputs;
    testing::OpBuilder build;
  };
  const std::vector<Case> cases = {
      {"add", {a, b}, [](Tape&, std::span<const Var> v) { return ad::add(v[0], v[1]); }},
      {"sub", {a, b}, [](Tape&, std::span<const Var> v) { return ad::sub(v[0], v[1]); }},
      {"mul", {a, b}, [](Tape&, std::span<const Var> v) { return ad::mul(v[0], v[1]); }},
      {"scalar_mul", {Tensor::scalar(0.7), b}, [](Tape&, std::span<const Var> v) { return ad::mul(v[0], v[1]); }},
      {"neg", {a}, [](Tape&, std::span<const Var> v) { return ad::neg(v[0]); }},
      {"scale", {a}, [](Tape&, std::span<const Var> v) { return ad::scale(v[0], -2.5); }},
      {"sigmoid", {a}, [](Tape&, std::span<const Var> v) { return ad::sigmoid(v[0]); }},
      {"relu", {a}, [](Tape&, std::span<const Var> v) { return ad::relu(v[0]); }},
      {"exp", {a}, [](Tape&, std::span<const Var> v) { return ad::exp(v[0]); }},
      {"log", {pos}, [](Tape&, std::span<const Var> v) { return ad::log(v[0]); }},
      {"sum", {a}, [](Tape&, std::span<const Var> v) { return ad::sum(v[0]); }},
      {"mean", {a}, [](Tape&, std::span<const Var> v) { return ad::mean(v[0]); }},
      {"mean_axis", {a}, [](Tape&, std::span<const Var> v) { return ad::mean_axis(v[0], 0); }},
      {"select", {a}, [](Tape&, std::span<const Var> v) { return ad::select(v[0], 1, 2); }},
      {"concat", {a, b}, [](Tape&, std::span<const Var> v) { return ad::concat(v, 1); }},
      {"add_bias", {a, random_tensor({3}, 13)},
       [](Tape&, std::span<const Var> v) { return ad::add_bias(v[0], v[1]); }},
      {"linear", {random_tensor({2, 2, 3}, 14), random_tensor({3, 4}, 15)},
       [](Tape&, std::span<const Var> v) { return ad::linear(v[0], v[1]); }},
      {"bmm", {random_tensor({2, 2, 3}, 16), random_tensor({2, 3, 2}, 17)},
       [](Tape&, std::span<const Var> v) { return ad::bmm(v[0], v[1]); }},
      {"transpose", {random_tensor({2, 2, 3}, 18)},
       [](Tape&, std::span<const Var> v) { return ad::transpose_last2(v[0]); }},
      {"reshape", {a}, [](Tape&, std::span<const Var> v) { return ad::reshape(v[0], {3, 2}); }},
      {"dot", {a, b}, [](Tape&, std::span<const Var> v) { return ad::dot(v[0], v[1]); }},
  };
  for (const auto& c : cases) EXPECT_LT(op_gradcheck(c.inputs, c.build), kGradTol) << c.name;
}

TEST(Elementwise, CrossEntropyGradient) {
  const std::vector<int> labels = {1, 0, 1};
  const double err = op_gradcheck({random_tensor({3, 2}, 20, -3, 3)}, [&](Tape&, std::span<const Var> v) {
    return ad::softmax_cross_entropy(v[0], labels);
  });
  EXPECT_LT(err, kGradTol);
}

TEST(Backward, SumGivesOnes) {
  Param x("x", ParamGroup::Weights, random_tensor({2, 3, 4}, 30));
  Tape tape;
  tape.backward(ad::sum(tape.param(x)));
  for (double g : x.grad.values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquares) {
  Param x("x", ParamGroup::Weights, Tensor::vector({1.0, 2.0}));
  Tape tape;
  Var v = tape.param(x);
  tape.backward(ad::sum(ad::mul(v, v)));
  EXPECT_EQ(x.grad, Tensor::vector({2.0, 4.0}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Param x("x", ParamGroup::Weights, Tensor::vector({1.0, 2.0}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(x)), ContractError);
}

TEST(Backward, UnusedParamGetsExactZero) {
  Param used("u", ParamGroup::Weights, Tensor::vector({1.0, 2.0}));
  Param unused("n", ParamGroup::Weights, Tensor::vector({3.0, 4.0}));
  Tape tape;
  Var u = tape.param(used);
  tape.param(unused);
  tape.backward(ad::sum(ad::exp(u)));
  EXPECT_EQ(unused.grad, Tensor::zeros({2}));
}

TEST(Backward, GradientShapesMatchValues) {
  Param w("w", ParamGroup::Weights, random_tensor({3, 2}, 31));
  Tape tape;
  Var x = tape.constant(random_tensor({4, 3}, 32));
  Var h = ad::sigmoid(ad::matmul(x, tape.param(w)));
  Var loss = ad::mean(h);
  tape.backward(loss);
  EXPECT_EQ(w.grad.shape(), w.value.shape());
  EXPECT_EQ(h.grad().shape(), h.value().shape());
  EXPECT_EQ(x.grad().shape(), x.value().shape());
}

TEST(Backward, AccumulatesAcrossCalls) {
  Param x("x", ParamGroup::Weights, Tensor::vector({1.0}));
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(ad::sum(ad::scale(tape.param(x), 3.0)));
  }
  EXPECT_EQ(x.grad[0], 6.0);
  x.zero_grad();
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Backward, FrozenGroupsReceiveNoGradient) {
  Param w("w", ParamGroup::Weights, Tensor::vector({1.0, 2.0}));
  Param a("a", ParamGroup::ArchAlpha, Tensor::vector({0.5, -0.5}));
  Tape tape;
  tape.set_trainable_groups({ParamGroup::ArchAlpha});
  tape.backward(ad::dot(tape.param(w), tape.param(a)));
  EXPECT_EQ(w.grad, Tensor::zeros({2}));
  EXPECT_EQ(a.grad, Tensor::vector({1.0, 2.0}));
  ASSERT_EQ(tape.groups_updated().size(), 1u);
  EXPECT_EQ(tape.groups_updated()[0], ParamGroup::ArchAlpha);
}

TEST(Backward, StopGradientBlocks) {
  Param x("x", ParamGroup::Weights, Tensor::vector({1.0, 2.0}));
  Tape tape;
  Var v = tape.param(x);
  tape.backward(ad::sum(ad::add(ad::stop_gradient(ad::mul(v, v)), v)));
  EXPECT_EQ(x.grad, Tensor::vector({1.0, 1.0}));
}

TEST(Backward, ForeignTapeRejected) {
  Tape t1;
  Tape t2;
  Var a = t1.constant(Tensor::vector({1.0}));
  Var b = t2.constant(Tensor::vector({1.0}));
  EXPECT_THROW(ad::add(a, b), ContractError);
}

TEST(Tape, NodeOrderIsTopological) {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1.0}));
  Var b = ad::exp(a);
  Var c = ad::add(a, b);
  EXPECT_LT(a.id(), b.id());
  EXPECT_LT(b.id(), c.id());
  EXPECT_EQ(tape.size(), 3u);
}

}  // namespace
}  // namespace stgsnas
