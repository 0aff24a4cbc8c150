#include <gtest/gtest.h>

#include <random>

#include <reasoner/degradation.hpp>
#include <reasoner/error.hpp>

#include "support.hpp"

using namespace reasoner;

namespace {

Tensor random_image(std::mt19937_64& rng, Shape shape) {
  return Tensor(shape, testing_support::normal_vector(rng, element_count(shape)));
}

Tensor combine(double a, const Tensor& x, double b, const Tensor& z) {
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * x[i] + b * z[i];
  return Tensor(x.shape(), v);
}

}  // namespace

TEST(Degradation, GrayscaleSumsChannels) {
  const Tensor x(Shape{2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  const DegradationOp op = DegradationOp::grayscale_sum(x.shape());
  const Tensor y = op.apply(x);
  EXPECT_EQ(y.shape(), (Shape{2, 2}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{11, 22, 33, 44}));
}

TEST(Degradation, CoarsenAveragesBlocks) {
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
  const Tensor y = DegradationOp::coarsen({4, 4}, 2).apply(Tensor({4, 4}, v));
  EXPECT_EQ(y.shape(), (Shape{2, 2}));
  // Block (0,0) holds 0, 1, 4, 5.
  EXPECT_DOUBLE_EQ(y[0], 2.5);
  EXPECT_DOUBLE_EQ(y[1], 4.5);
  EXPECT_DOUBLE_EQ(y[2], 10.5);
  EXPECT_DOUBLE_EQ(y[3], 12.5);
  EXPECT_THROW(DegradationOp::coarsen({4, 5}, 2), Error);
}

TEST(Degradation, RescalePoolWorksPerChannel) {
  std::mt19937_64 rng(1);
  const Tensor x = random_image(rng, {3, 4, 4});
  const Tensor y = DegradationOp::rescale_pool(x.shape(), 2).apply(x);
  EXPECT_EQ(y.shape(), (Shape{3, 2, 2}));
  const double want = (x[16 + 2] + x[16 + 3] + x[16 + 6] + x[16 + 7]) / 4.0;
  EXPECT_NEAR(y[4 + 1], want, 1e-15);
}

TEST(Degradation, MaskDropsEntries) {
  const Tensor x = Tensor::vector({5, 6, 7, 8, 9});
  const DegradationOp op = DegradationOp::mask({5}, {1, 3});
  EXPECT_EQ(op.output_shape(), (Shape{3}));
  EXPECT_EQ(op.apply(x).to_vector(), (std::vector<double>{5, 7, 9}));
  try {
    DegradationOp::mask({5}, {5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::index_out_of_bounds);
  }
}

TEST(Degradation, MaskColumnsKeepsTheRest) {
  std::vector<double> v(12);
  for (std::size_t i = 0; i < 12; ++i) v[i] = static_cast<double>(i);
  const Tensor y = DegradationOp::mask_columns({3, 4}, 0, 2).apply(Tensor({3, 4}, v));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{2, 3, 6, 7, 10, 11}));
}

TEST(Degradation, ThenComposes) {
  std::mt19937_64 rng(2);
  const Tensor x = random_image(rng, {2, 4, 4});
  const auto gray = DegradationOp::grayscale_sum(x.shape());
  const auto coarse = DegradationOp::coarsen(gray.output_shape(), 2);
  const auto both = gray.then(coarse);
  EXPECT_EQ(both.kind(), DegradationKind::composite);
  const Tensor a = both.apply(x), b = coarse.apply(gray.apply(x));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  EXPECT_THROW(coarse.then(gray), Error);
}

TEST(Degradation, LinearityProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<DegradationOp> ops = {
      DegradationOp::grayscale_sum({3, 4, 4}),
      DegradationOp::coarsen({4, 4}, 2),
      DegradationOp::rescale_pool({3, 4, 4}, 2),
      DegradationOp::mask({4, 4}, {0, 5, 15}),
      DegradationOp::mask_columns({4, 4}, 1, 3),
  };
  for (const auto& op : ops) {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor x = random_image(rng, op.input_shape()), z = random_image(rng, op.input_shape());
      const double a = u(rng), b = u(rng);
      const Tensor lhs = op.apply(combine(a, x, b, z));
      const Tensor rhs = combine(a, op.apply(x), b, op.apply(z));
      for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
    }
  }
}

TEST(Degradation, RejectsWrongInputShape) {
  const auto op = DegradationOp::coarsen({4, 4}, 2);
  EXPECT_THROW(op.apply(Tensor::zeros({2, 8})), Error);
}
