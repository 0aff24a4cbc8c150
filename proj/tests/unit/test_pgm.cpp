#include <gtest/gtest.h>

#include <cmath>

#include <reasoner/error.hpp>
#include <reasoner/pgm.hpp>

using namespace reasoner;

TEST(Pgm, HeaderAndScaling) {
  const Tensor img({2, 3}, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
  const auto bytes = encode_pgm(img);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  const std::vector<int> want = {0, 51, 102, 153, 204, 255};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(bytes[header.size() + i], want[i]);
}

TEST(Pgm, ConstantImageIsBlack) {
  const auto bytes = encode_pgm(Tensor({2, 2}, {7, 7, 7, 7}));
  for (std::size_t i = bytes.size() - 4; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(Pgm, RejectsBadInput) {
  EXPECT_THROW(encode_pgm(Tensor::vector({1, 2})), Error);
  EXPECT_THROW(encode_pgm(Tensor({1, 2}, {1, std::nan("")})), Error);
}
