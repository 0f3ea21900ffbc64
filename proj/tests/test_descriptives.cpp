#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ptq/descriptives.hpp"

using namespace ptq;

using Bits = std::vector<std::uint8_t>;

TEST(Frequencies, HandCount) {
  // 10 calls, 4 poor; token on 3 calls, 1 of them poor
  std::vector<std::vector<int>> rows(10, {0, 0, 1});
  std::vector<int> poor = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  rows[0][0] = 1;
  rows[5][0] = 1;
  rows[6][0] = 1;
  const auto rep = token_frequencies(oracle::dataset({"t", "never", "always"}, rows, poor));
  EXPECT_EQ(rep.population_all, 10u);
  EXPECT_EQ(rep.population_poor, 4u);
  EXPECT_DOUBLE_EQ(rep.tokens[0].rate_all, 0.3);
  EXPECT_DOUBLE_EQ(*rep.tokens[0].rate_poor, 0.25);
  EXPECT_EQ(rep.tokens[0].count_all, 3u);
  EXPECT_EQ(rep.tokens[0].count_poor, 1u);
  EXPECT_DOUBLE_EQ(rep.tokens[1].rate_all, 0.0);
  EXPECT_DOUBLE_EQ(rep.tokens[2].rate_all, 1.0);
  EXPECT_EQ(rep.order_by_all(), (std::vector<std::size_t>{2, 0, 1}));
}

TEST(Frequencies, OrdersCanDiffer) {
  // a common overall, b concentrated in poor calls
  std::vector<std::vector<int>> rows = {{0, 1}, {0, 1}, {1, 0}, {1, 0}, {1, 0}, {1, 0}, {0, 0}, {0, 0}};
  std::vector<int> poor = {1, 1, 0, 0, 0, 0, 0, 1};
  const auto rep = token_frequencies(oracle::dataset({"a", "b"}, rows, poor));
  EXPECT_EQ(rep.order_by_all(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(rep.order_by_poor(), (std::vector<std::size_t>{1, 0}));
}

TEST(Frequencies, NoPoorCallsLeavesPoorRateUndefined) {
  const auto rep = token_frequencies(oracle::dataset({"a"}, {{1}, {0}}, {0, 0}));
  EXPECT_FALSE(rep.tokens[0].rate_poor.has_value());
  EXPECT_EQ(rep.population_poor, 0u);
}

TEST(Frequencies, EmptyDatasetThrows) {
  SurveyDataset ds;
  ds.vocabulary = TokenVocabulary::from_names({"a"});
  EXPECT_THROW(token_frequencies(ds), ValidationError);
}

TEST(InformationGainTest, HandExample) {
  const auto ig = information_gain(Bits{1, 0, 0, 0}, Bits{1, 1, 0, 0});
  const double h13 = -(1.0 / 3) * std::log2(1.0 / 3) - (2.0 / 3) * std::log2(2.0 / 3);
  EXPECT_NEAR(ig.bits, 1.0 - 0.75 * h13, 1e-12);
  EXPECT_NEAR(ig.bits, 0.3113, 1e-4);
  EXPECT_DOUBLE_EQ(ig.entropy_y, 1.0);
}

TEST(InformationGainTest, PerfectAndIndependent) {
  EXPECT_DOUBLE_EQ(information_gain(Bits{1, 1, 0, 0}, Bits{1, 1, 0, 0}).bits, 1.0);
  EXPECT_NEAR(information_gain(Bits{1, 0, 1, 0}, Bits{1, 1, 0, 0}).bits, 0.0, 1e-15);
}

TEST(InformationGainTest, ConstantTargetHasNoFraction) {
  const auto ig = information_gain(Bits{1, 0, 1}, Bits{0, 0, 0});
  EXPECT_EQ(ig.bits, 0.0);
  EXPECT_FALSE(ig.fraction.has_value());
}

TEST(InformationGainTest, Errors) {
  EXPECT_THROW(information_gain(Bits{1}, Bits{1, 0}), std::invalid_argument);
  EXPECT_THROW(information_gain(Bits{}, Bits{}), std::invalid_argument);
}

TEST(InformationGainTest, PropertiesOnRandomSeries) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    Bits x(n), y(n), fx(n), fy(n);
    const double px = rng.uniform(), py = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.bernoulli(px);
      y[i] = rng.bernoulli(py) ? 1 - x[i] * (rng.bernoulli(0.3) ? 1 : 0) : x[i];
      fx[i] = 1 - x[i];
      fy[i] = 1 - y[i];
    }
    const auto ig = information_gain(x, y);
    EXPECT_GE(ig.bits, 0.0);
    EXPECT_NEAR(ig.bits, oracle::information_gain(x, y), 1e-10);
    EXPECT_NEAR(information_gain(fx, fy).bits, ig.bits, 1e-12);
    EXPECT_LE(ig.bits, std::min(oracle::entropy(x), oracle::entropy(y)) + 1e-12);
    // symmetric in its arguments
    EXPECT_NEAR(information_gain(y, x).bits, ig.bits, 1e-12);
  }
}

TEST(Jaccard, Examples) {
  const auto ds = oracle::dataset({"a", "b", "a2", "d"}, {{1, 1, 1, 0}, {1, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 0, 1}},
                                  {1, 0, 0, 0});
  const auto m = jaccard_matrix(ds);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.at(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(m.at(0, 3), 0.0);
  EXPECT_FALSE(m.is_undefined(0, 3));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(m.at(i, i), 0.0);
}

TEST(Jaccard, EmptyUnionFlagged) {
  const auto m = jaccard_matrix(oracle::dataset({"a", "b", "c"}, {{1, 0, 0}, {0, 0, 0}}, {0, 1}));
  EXPECT_TRUE(m.is_undefined(1, 2));
  EXPECT_TRUE(m.is_undefined(2, 1));
  EXPECT_EQ(m.at(1, 2), 0.0);
  EXPECT_FALSE(m.is_undefined(0, 1));
}

TEST(Jaccard, NeedsTwoTokens) {
  EXPECT_THROW(jaccard_matrix(oracle::dataset({"a"}, {{1}}, {1})), ValidationError);
}

TEST(Jaccard, MatchesSetOracleAndIsSymmetric) {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t p = 8, n = 300;
    std::vector<std::vector<int>> rows(n, std::vector<int>(p, 0));
    std::vector<int> poor(n);
    for (std::size_t i = 0; i < n; ++i) {
      poor[i] = rng.bernoulli(0.3);
      for (std::size_t t = 0; t + 1 < p; ++t) rows[i][t] = rng.bernoulli(0.05 * static_cast<double>(t + 1));
    }
    const auto ds = oracle::dataset({"a", "b", "c", "d", "e", "f", "g", "h"}, rows, poor);
    const auto m = jaccard_matrix(ds);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        EXPECT_EQ(m.at(i, j), m.at(j, i));
        if (i != j) {
          EXPECT_DOUBLE_EQ(m.at(i, j), oracle::jaccard(token_series(ds, i), token_series(ds, j)));
        }
      }
  }
}
