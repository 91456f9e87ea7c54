#include "bcfp/metrics.h"

#include <cmath>

#include <gtest/gtest.h>

#include "bcfp/error.h"
#include "bcfp/random.h"
#include "oracles.h"

namespace bcfp {
namespace {

using testing::PairwiseAuc;

TEST(ConfusionTest, WorkedExample) {
  Confusion c{3, 1, 5, 1};
  const EvalReport r = PointMetrics(c);
  EXPECT_EQ(r.precision, 0.75);
  EXPECT_EQ(r.recall, 0.75);
  EXPECT_EQ(r.accuracy, 0.8);
}

TEST(ConfusionTest, CountsAndEdgeCases) {
  const std::vector<int> y = {1, 0, 1, 0, 0};
  EXPECT_EQ(ComputeConfusion(y, y), (Confusion{2, 0, 3, 0}));
  EXPECT_EQ(PointMetrics(ComputeConfusion(y, y)).accuracy, 1.0);
  const std::vector<int> none(5, 0);
  const EvalReport r = PointMetrics(ComputeConfusion(y, none));
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_EQ(r.precision, 0.0);
  try {
    ComputeConfusion(y, std::vector<int>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(RocAucTest, Examples) {
  EXPECT_EQ(RocAuc(std::vector{0, 0, 1, 1}, std::vector{0.1, 0.2, 0.3, 0.4}),
            1.0);
  EXPECT_EQ(RocAuc(std::vector{0, 1, 1, 0}, std::vector{0.5, 0.5, 0.5, 0.5}),
            0.5);
  EXPECT_EQ(RocAuc(std::vector{1, 0, 1, 0}, std::vector{0.9, 0.8, 0.7, 0.1}),
            0.75);
  try {
    RocAuc(std::vector{1, 1}, std::vector{0.1, 0.2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
}

TEST(RocAucTest, MatchesPairwiseOracleAndProperties) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 2 + rng.Below(199);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) {
      y[i] = rng.Bernoulli(0.3);
      // Coarse scores force ties.
      s[i] = static_cast<double>(rng.Below(20)) / 20.0;
    }
    y[0] = 1;
    y[1] = 0;
    const double auc = RocAuc(y, s);
    EXPECT_NEAR(auc, PairwiseAuc(y, s), 1e-9);
    std::vector<double> mono(n), flipped(n);
    for (size_t i = 0; i < n; ++i) {
      mono[i] = std::exp(3 * s[i]) - 7;
      flipped[i] = -s[i];
    }
    EXPECT_NEAR(RocAuc(y, mono), auc, 1e-12);
    EXPECT_NEAR(RocAuc(y, flipped), 1 - auc, 1e-12);
  }
}

TEST(PrAucTest, Examples) {
  EXPECT_EQ(PrAuc(std::vector{1, 1, 0}, std::vector{0.9, 0.8, 0.1}), 1.0);
  EXPECT_EQ(PrAuc(std::vector{0, 0, 0, 1}, std::vector{0.9, 0.8, 0.7, 0.1}),
            0.25);
  EXPECT_EQ(PrAuc(std::vector{1, 1, 1}, std::vector{0.3, 0.2, 0.1}), 1.0);
  // Hand AP: ranks 1(+),2(-),3(+) -> 1/2 * 1 + 1/2 * 2/3.
  EXPECT_NEAR(PrAuc(std::vector{1, 0, 1}, std::vector{0.9, 0.5, 0.2}),
              0.5 + 1.0 / 3.0, 1e-15);
  try {
    PrAuc(std::vector{0, 0}, std::vector{0.1, 0.2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPositives);
  }
}

TEST(EvaluateTest, ReportAndTable) {
  const std::vector<int> y = {1, 0, 1, 0};
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.1};
  const EvalReport r = Evaluate(y, s);
  EXPECT_EQ(r.confusion, (Confusion{2, 1, 1, 0}));
  EXPECT_EQ(r.roc_auc, 0.75);
  const auto j = r.ToJson();
  EXPECT_EQ(j["confusion"]["tp"], 2);
  const std::pair<std::string, EvalReport> rows[] = {{"Transformer", r}};
  const std::string table = FormatReportTable(rows);
  EXPECT_NE(table.find("ROC AUC"), std::string::npos);
  EXPECT_NE(table.find("75.00"), std::string::npos);
  EXPECT_THROW(Evaluate(y, std::vector<double>{0.1}), Error);
}

}  // namespace
}  // namespace bcfp
