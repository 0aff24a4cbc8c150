#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <reasoner/autodiff.hpp>
#include <reasoner/error.hpp>

#include "support.hpp"

using namespace reasoner;
using testing_support::numeric_gradient;

namespace {

using Fn = std::function<Var(const Var&)>;

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Contracts the output with fixed random weights so that every output
// element's adjoint is exercised (a plain sum would hide softmax errors).
void expect_gradient_matches(const Fn& f, const Tensor& x, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const Tensor out = f(Var(x)).value();
  const Tensor w = random_tensor(rng, out.shape());
  auto loss = [&](const Var& v) { return sum(mul(f(v), Var(w))); };

  Tape tape;
  const Var in = tape.input(x);
  const auto grads = tape.gradient(loss(in));
  const Tensor& analytic = grads.at(0);

  const auto numeric = numeric_gradient(
      [&](std::span<const double> p) {
        return loss(Var(Tensor(x.shape(), std::vector<double>(p.begin(), p.end())))).value().item();
      },
      x.to_vector());
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    EXPECT_NEAR(analytic[i], numeric[i], 1e-5 * std::max(1.0, std::abs(numeric[i]))) << "element " << i;
  }
}

}  // namespace

TEST(AutodiffGradient, ElementwiseBinaryAgainstConstant) {
  std::mt19937_64 rng(3);
  const Tensor c = random_tensor(rng, {2, 3}, 0.5, 2.0);
  const Tensor x = random_tensor(rng, {2, 3}, 0.5, 2.0);
  expect_gradient_matches([&](const Var& v) { return add(v, Var(c)); }, x);
  expect_gradient_matches([&](const Var& v) { return sub(Var(c), v); }, x);
  expect_gradient_matches([&](const Var& v) { return mul(v, v); }, x);
  expect_gradient_matches([&](const Var& v) { return div(Var(c), v); }, x);
  expect_gradient_matches([&](const Var& v) { return div(v, Var(c)); }, x);
}

TEST(AutodiffGradient, ScalarBroadcast) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(rng, {4}, 0.5, 2.0);
  expect_gradient_matches([](const Var& v) { return mul(v, 3.0); }, x);
  expect_gradient_matches([](const Var& v) { return div(v, -2.0); }, x);
  expect_gradient_matches([](const Var& v) { return add(v, 1.5); }, x);
  expect_gradient_matches([](const Var& v) { return sub(v, 0.25); }, x);
  // Tensor times a tracked single-element value.
  expect_gradient_matches([](const Var& v) { return mul(v, slice(v, 1, 1)); }, x);
  expect_gradient_matches([](const Var& v) { return div(v, sum(v)); }, x);
}

TEST(AutodiffGradient, BroadcastRejectsOtherShapes) {
  EXPECT_THROW(add(Var(Tensor::vector({1, 2, 3})), Var(Tensor::vector({1, 2}))), Error);
}

TEST(AutodiffGradient, MatvecAndMatmul) {
  std::mt19937_64 rng(5);
  const Tensor w = random_tensor(rng, {3, 4});
  const Tensor x = random_tensor(rng, {4});
  expect_gradient_matches([&](const Var& v) { return matvec(Var(w), v); }, x);
  expect_gradient_matches([&](const Var& v) { return matvec(v, Var(x)); }, w);
  const Tensor b = random_tensor(rng, {4, 2});
  expect_gradient_matches([&](const Var& v) { return matmul(v, Var(b)); }, w);
  expect_gradient_matches([&](const Var& v) { return matmul(Var(w), v); }, b);
}

TEST(AutodiffGradient, UnaryPrimitives) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor(rng, {5});
  const Tensor pos = random_tensor(rng, {5}, 0.2, 3.0);
  expect_gradient_matches([](const Var& v) { return exp(v); }, x);
  expect_gradient_matches([](const Var& v) { return log(v); }, pos);
  expect_gradient_matches([](const Var& v) { return tanh(v); }, x);
  expect_gradient_matches([](const Var& v) { return sigmoid(v); }, x);
  expect_gradient_matches([](const Var& v) { return softmax(v); }, x);
}

TEST(AutodiffGradient, PiecewiseLinearAwayFromKink) {
  const Tensor x = Tensor::vector({-1.5, -0.3, 0.4, 2.0, -0.8});
  expect_gradient_matches([](const Var& v) { return relu(v); }, x);
  expect_gradient_matches([](const Var& v) { return leaky_relu(v, 0.1); }, x);
}

TEST(AutodiffGradient, StructuralOps) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(rng, {6});
  expect_gradient_matches([](const Var& v) { return reshape(v, {2, 3}); }, x);
  expect_gradient_matches([](const Var& v) { return slice(v, 2, 3); }, x);
  expect_gradient_matches([](const Var& v) { return sum(mul(v, v)); }, x);
  expect_gradient_matches(
      [](const Var& v) {
        const Var parts[] = {slice(v, 3, 3), exp(slice(v, 0, 2)), v};
        return concat(parts);
      },
      x);
}

TEST(AutodiffGradient, LogFloorZeroesAdjointWhereActive) {
  Tape tape;
  const Var x = tape.input(Tensor::vector({1e-320, 0.5}));
  const auto g = tape.gradient(sum(log(x, 1e-300)));
  EXPECT_EQ(g.at(0)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.at(0)[1], 2.0);
  EXPECT_DOUBLE_EQ(log(Var(Tensor::vector({0.0})), 1e-300).value()[0], std::log(1e-300));
}

TEST(AutodiffGradient, RandomCompositionsMatchFiniteDifferences) {
  // Property: any chain of primitives differentiates correctly.
  std::mt19937_64 rng(8);
  const std::vector<Fn> steps = {
      [](const Var& v) { return tanh(v); },
      [](const Var& v) { return sigmoid(v); },
      [](const Var& v) { return softmax(v); },
      [](const Var& v) { return mul(v, v); },
      [](const Var& v) { return add(exp(mul(v, 0.3)), v); },
      [](const Var& v) { return leaky_relu(v, 0.2); },
      [](const Var& v) { return div(v, add(sum(mul(v, v)), 1.0)); },
  };
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor w = random_tensor(rng, {4, 4});
    std::vector<std::size_t> chain;
    for (int k = 0; k < 4; ++k) chain.push_back(rng() % steps.size());
    auto f = [&](const Var& v) {
      Var h = matvec(Var(w), v);
      for (auto i : chain) h = steps[i](h);
      return h;
    };
    expect_gradient_matches(f, random_tensor(rng, {4}), trial);
  }
}

TEST(Softmax, SumsToOneAndSurvivesLargeInputs) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor(rng, {10}, -50.0, 50.0);
    const Tensor p = softmax(Var(x)).value();
    double s = 0.0;
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const Tensor big = softmax(Var(Tensor::vector({1000.0, 1000.0}))).value();
  EXPECT_DOUBLE_EQ(big[0], 0.5);
}

TEST(Softmax, RejectsNonFiniteAndWrongRank) {
  EXPECT_THROW(softmax(Var(Tensor::vector({1.0, NAN}))), Error);
  EXPECT_THROW(softmax(Var(Tensor::matrix(2, 2, {1, 2, 3, 4}))), Error);
}

TEST(Tape, ForwardValuesIdenticalWithAndWithoutTape) {
  std::mt19937_64 rng(10);
  const Tensor w = random_tensor(rng, {5, 5});
  const Tensor x = random_tensor(rng, {5});
  auto f = [&](const Var& v) {
    return log(softmax(tanh(matvec(Var(w), mul(exp(v), 0.5)))), 1e-300);
  };
  const Tensor plain = f(Var(x)).value();
  Tape tape;
  const Tensor taped = f(tape.input(x)).value();
  EXPECT_TRUE(bitwise_equal(plain, taped));
}

TEST(Tape, InputsNumberedInOrderAndUnusedInputsGetZeros) {
  Tape tape;
  const Var a = tape.input(Tensor::vector({1.0, 2.0}));
  const Var b = tape.input(Tensor::scalar(3.0));
  const auto g = tape.gradient(sum(mul(a, a)));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.at(0)[1], 4.0);
  EXPECT_EQ(g.at(1).item(), 0.0);
  (void)b;
}

TEST(Tape, AccumulatesOverReusedValues) {
  Tape tape;
  const Var x = tape.input(Tensor::scalar(3.0));
  const Var y = add(mul(x, x), x);  // x^2 + x
  EXPECT_DOUBLE_EQ(tape.gradient(y).at(0).item(), 7.0);
}

TEST(Tape, RejectsNonScalarOutputAndSecondUse) {
  Tape tape;
  const Var x = tape.input(Tensor::vector({1.0, 2.0}));
  try {
    tape.gradient(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
  const Var s = sum(x);
  tape.gradient(s);
  try {
    tape.gradient(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::tape_consumed);
  }
}

TEST(Tape, RejectsOutputsFromAnotherTape) {
  Tape a, b;
  const Var x = a.input(Tensor::scalar(1.0));
  b.input(Tensor::scalar(1.0));
  EXPECT_THROW(b.gradient(sum(x)), Error);
}
