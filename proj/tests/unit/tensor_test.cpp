#include <gtest/gtest.h>

#include <cmath>

#include "salsa/error.h"
#include "salsa/gradcheck.h"
#include "salsa/ops.h"
#include "salsa/rng.h"

using namespace salsa;

TEST(Tensor, MatmulMatchesHandValues) {
  const auto a = Tensor::fromVector({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::fromVector({3, 2}, {7, 8, 9, 10, 11, 12});
  const auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_EQ(c.toVector(), (std::vector<double>{58, 64, 139, 154}));
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  const auto a = Tensor::zeros({2, 3});
  EXPECT_THROW(matmul(a, a), DimensionError);
}

TEST(Tensor, LogOfZeroIsDomainError) {
  EXPECT_THROW(salsa::log(Tensor::fromVector({2}, {1.0, 0.0})), DomainError);
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  Rng rng(3);
  const auto p = softmax(Tensor::randn({4, 7}, rng, 5.0), 1);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      s += p.at(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Tensor, BackwardOfProductAccumulates) {
  auto x = Tensor::fromVector({3}, {1, 2, 3}, true);
  auto y = Tensor::fromVector({3}, {4, 5, 6}, true);
  sum(mul(x, y)).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{4, 5, 6}));
  sum(mul(x, y)).backward();
  EXPECT_EQ(x.grad()[0], 8.0);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  auto x = Tensor::fromVector({2}, {1, 2}, true);
  NoGradGuard guard;
  EXPECT_FALSE(gradEnabled());
  EXPECT_FALSE(mul(x, x).requiresGrad());
}

TEST(Tensor, SameSeedSameValues) {
  Rng a(42), b(42);
  EXPECT_EQ(Tensor::randn({5, 5}, a, 1.0).toVector(), Tensor::randn({5, 5}, b, 1.0).toVector());
}

TEST(Tensor, L2NormalizeRowsGivesUnitRows) {
  Rng rng(1);
  const auto y = l2NormalizeRows(Tensor::randn({3, 8}, rng, 2.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      s += y.at(i, j) * y.at(i, j);
    }
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-14);
  }
}

TEST(Rng, DerivedStreamsDependOnlyOnSeedAndId) {
  Rng a(9);
  a.nextU64();
  Rng b(9);
  EXPECT_EQ(a.derive(4).nextU64(), b.derive(4).nextU64());
  EXPECT_NE(b.derive(4).nextU64(), b.derive(5).nextU64());
}

TEST(Rng, StateRoundTrip) {
  Rng a(5);
  a.normal();
  Rng b;
  b.setState(a.state());
  EXPECT_EQ(a.nextU64(), b.nextU64());
}
