#include <cmath>

#include <gtest/gtest.h>

#include "bcfp/error.h"
#include "bcfp/nn/adam.h"
#include "bcfp/nn/checkpoint.h"
#include "bcfp/nn/kernels.h"
#include "bcfp/nn/ops.h"
#include "gradcheck.h"
#include "primitive_checks.h"

namespace bcfp::nn {
namespace {

using testing::CheckGradients;
using testing::RandomMatrix;

TEST(GradientTest, EveryPrimitiveMatchesFiniteDifferences) {
  Rng rng(2024);
  for (int round = 0; round < 5; ++round) {
    for (auto& c : testing::RandomPrimitiveCases(rng)) {
      const auto r = CheckGradients(c.fn, c.inputs, rng, 100);
      EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " round " << round;
    }
  }
}

TEST(GradientTest, AttentionEightBySixteenFourHeads) {
  Rng rng(7);
  const Mask mask(8, 1);
  const Matrix w = RandomMatrix(rng, 8, 16);
  std::vector<Matrix> inputs = {RandomMatrix(rng, 8, 16)};
  for (int i = 0; i < 4; ++i) {
    inputs.push_back(RandomMatrix(rng, 16, 16, 0.3));
    inputs.push_back(RandomMatrix(rng, 1, 16, 0.3));
  }
  const auto r = CheckGradients(
      [&](Graph& g, std::span<const Var> v) {
        const AttentionVars p{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
        return WeightedSum(g, MultiHeadAttention(g, v[0], p, 4, mask).output,
                           w);
      },
      inputs, rng, 100);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(OpsTest, SoftmaxUniform) {
  Graph g;
  const Var x = g.Constant(Matrix::Zero(1, 3));
  const Matrix& y = g.value(Softmax(g, x));
  for (int j = 0; j < 3; ++j)
    EXPECT_NEAR(y(0, j), 1.0 / 3.0, 1e-15);
}

TEST(OpsTest, PoolWithSingleUnmaskedRowIsThatRow) {
  Rng rng(1);
  Graph g;
  const Matrix h = RandomMatrix(rng, 6, 4);
  Mask mask(6, 0);
  mask[3] = 1;
  const Matrix& pooled = g.value(GlobalAveragePool(g, g.Constant(h), mask));
  EXPECT_EQ(pooled, h.row(3));
}

TEST(OpsTest, ConvHalvesLength) {
  Rng rng(2);
  Graph g;
  const Var y = Conv1dK2S2(g, g.Constant(RandomMatrix(rng, 10, 3)),
                           g.Constant(RandomMatrix(rng, 6, 5)),
                           g.Constant(RandomMatrix(rng, 1, 5)));
  EXPECT_EQ(g.value(y).rows(), 5);
  EXPECT_EQ(g.value(y).cols(), 5);
  const Var odd = Conv1dK2S2(g, g.Constant(RandomMatrix(rng, 7, 3)),
                             g.Constant(RandomMatrix(rng, 6, 5)),
                             g.Constant(RandomMatrix(rng, 1, 5)));
  EXPECT_EQ(g.value(odd).rows(), 4);
  EXPECT_EQ(DownsampleMask({1, 1, 1, 0, 0, 0, 0, 1, 0}),
            (Mask{1, 1, 0, 1, 0}));
}

AttentionVars RandomAttention(Graph& g, Rng& rng, Eigen::Index d) {
  AttentionVars p;
  Var* slots[] = {&p.wq, &p.bq, &p.wk, &p.bk, &p.wv, &p.bv, &p.wo, &p.bo};
  for (int i = 0; i < 8; ++i)
    *slots[i] = g.Constant(RandomMatrix(rng, i % 2 ? 1 : d, d, 0.4));
  return p;
}

TEST(AttentionTest, SingleKeyEqualsValueProjection) {
  Rng rng(3);
  Graph g;
  const AttentionVars p = RandomAttention(g, rng, 8);
  const Matrix x = RandomMatrix(rng, 1, 8);
  const auto r = MultiHeadAttention(g, g.Constant(x), p, 4, Mask{1});
  const Matrix expected = ((x * g.value(p.wv) + g.value(p.bv)) *
                               g.value(p.wo) +
                           g.value(p.bo));
  EXPECT_LT((g.value(r.output) - expected).cwiseAbs().maxCoeff(), 1e-12);
  for (Var w : r.weights)
    EXPECT_DOUBLE_EQ(g.value(w)(0, 0), 1.0);
}

TEST(AttentionTest, IdenticalRowsGiveIdenticalOutputs) {
  Rng rng(4);
  Graph g;
  const AttentionVars p = RandomAttention(g, rng, 8);
  const Matrix row = RandomMatrix(rng, 1, 8);
  const Matrix x = row.replicate(5, 1);
  const auto r = MultiHeadAttention(g, g.Constant(x), p, 2, Mask(5, 1));
  const Matrix& out = g.value(r.output);
  for (int i = 1; i < 5; ++i)
    EXPECT_LT((out.row(i) - out.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AttentionTest, RowsSumToOneOverUnmaskedKeys) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    const AttentionVars p = RandomAttention(g, rng, 8);
    const Mask mask = testing::RandomMask(rng, 9);
    const auto r = MultiHeadAttention(g, g.Constant(RandomMatrix(rng, 9, 8)),
                                      p, 4, mask);
    for (Var w : r.weights) {
      const Matrix& a = g.value(w);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-9);
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
          if (!mask[static_cast<size_t>(j)])
            EXPECT_EQ(a(i, j), 0.0);
        }
      }
    }
  }
}

TEST(PositionsTest, Examples) {
  const Matrix pe = SinusoidalPositions(5, 6);
  for (int j = 0; j < 6; ++j)
    EXPECT_EQ(pe(0, j), j % 2 ? 1.0 : 0.0);
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NEAR(SinusoidalPositions(2, 4)(1, 0), 0.8414709848, 1e-10);
  EXPECT_NEAR(SinusoidalPositions(2, 4)(1, 3), std::cos(1.0 / 100.0), 1e-15);
  try {
    SinusoidalPositions(3, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOddDimension);
  }
}

TEST(DropoutTest, IdentityCasesAndScaling) {
  Rng rng(6);
  Graph g;
  const Var x = g.Constant(RandomMatrix(rng, 4, 4));
  EXPECT_EQ(Dropout(g, x, 0.5, 1, false).id, x.id);
  EXPECT_EQ(Dropout(g, x, 0.0, 1, true).id, x.id);
  const Var ones = g.Constant(Matrix::Ones(200, 50));
  const Matrix& y = g.value(Dropout(g, ones, 0.25, 9, true));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
  }
  EXPECT_NEAR(y.mean(), 1.0, 0.02);
  EXPECT_EQ(g.value(Dropout(g, ones, 0.25, 9, true)), y);
  EXPECT_THROW(Dropout(g, x, 1.0, 1, true), Error);
}

TEST(OpsTest, ShapeAndFiniteChecks) {
  Graph g;
  const Var a = g.Constant(Matrix::Ones(2, 3));
  const Var b = g.Constant(Matrix::Ones(2, 3));
  try {
    MatMul(g, a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  Matrix big = Matrix::Constant(1, 1, 1e308);
  try {
    Scale(g, g.Constant(big), 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
  }
  const int32_t bad[] = {3};
  try {
    EmbeddingLookup(g, a, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownTokenId);
  }
}

TEST(AdamTest, ZeroGradientLeavesValue) {
  Parameter p("w", Matrix::Constant(2, 2, 0.5));
  Parameter* ps[] = {&p};
  AdamStep(ps, {});
  EXPECT_EQ(p.value, Matrix::Constant(2, 2, 0.5));
  EXPECT_EQ(p.step, 1);
}

TEST(AdamTest, FirstStepHandComputed) {
  Parameter p("w", Matrix::Constant(1, 1, 1.0));
  p.grad(0, 0) = 0.2;
  Parameter* ps[] = {&p};
  AdamStep(ps, {});
  // m = 0.02, v = 4e-5; m_hat = 0.2, v_hat = 0.04; update = 0.2 / (0.2 + eps).
  const double expected = 1.0 - 1e-3 * 0.2 / (0.2 + 1e-8);
  EXPECT_NEAR(p.value(0, 0), expected, 1e-15);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(AdamTest, ConstantGradientUpdateApproachesLr) {
  Parameter p("w", Matrix::Zero(1, 1));
  Parameter* ps[] = {&p};
  double prev = 0.0;
  double step = 0.0;
  for (int t = 0; t < 2000; ++t) {
    p.grad(0, 0) = -3.0;
    AdamStep(ps, {});
    step = p.value(0, 0) - prev;
    prev = p.value(0, 0);
  }
  EXPECT_NEAR(step, 1e-3, 1e-9);
}

TEST(CheckpointTest, RoundTripAndValidation) {
  Rng rng(8);
  Parameter a("a", RandomMatrix(rng, 3, 4));
  Parameter b("b", RandomMatrix(rng, 1, 4));
  const Parameter* cps[] = {&a, &b};
  const auto j = CheckpointToJson(cps);
  Parameter a2("a", Matrix::Zero(3, 4));
  Parameter b2("b", Matrix::Zero(1, 4));
  Parameter* ps[] = {&a2, &b2};
  CheckpointFromJson(nlohmann::json::parse(j.dump()), ps);
  EXPECT_EQ(a2.value, a.value);
  EXPECT_EQ(b2.value, b.value);
  Parameter wrong("a", Matrix::Zero(4, 3));
  Parameter* bad[] = {&wrong, &b2};
  EXPECT_THROW(CheckpointFromJson(j, bad), Error);
}

TEST(KernelsTest, FastMatchesReference) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index m = 1 + rng.Below(20), k = 1 + rng.Below(20),
                       n = 1 + rng.Below(20);
    const Matrix a = RandomMatrix(rng, m, k);
    const Matrix b = RandomMatrix(rng, k, n);
    const Matrix at = a.transpose(), bt = b.transpose();
    for (int flags = 0; flags < 4; ++flags) {
      const bool ta = flags & 1, tb = flags & 2;
      Matrix fast, ref;
      kernels::Gemm(ta ? at : a, ta, tb ? bt : b, tb, fast);
      kernels::reference::Gemm(ta ? at : a, ta, tb ? bt : b, tb, ref);
      EXPECT_LT((fast - ref).cwiseAbs().maxCoeff(), 1e-12);
    }
    const Matrix logits = RandomMatrix(rng, m, n);
    const Mask mask = testing::RandomMask(rng, static_cast<size_t>(n));
    Matrix s1, s2, d1, d2;
    kernels::SoftmaxRows(logits, &mask, s1);
    kernels::reference::SoftmaxRows(logits, &mask, s2);
    EXPECT_LT((s1 - s2).cwiseAbs().maxCoeff(), 1e-14);
    const Matrix dy = RandomMatrix(rng, m, n);
    kernels::SoftmaxRowsBackward(s1, dy, d1);
    kernels::reference::SoftmaxRowsBackward(s1, dy, d2);
    EXPECT_LT((d1 - d2).cwiseAbs().maxCoeff(), 1e-14);
    const Matrix gamma = RandomMatrix(rng, 1, n), beta = RandomMatrix(rng, 1, n);
    Matrix y1, y2, xh1, xh2, dx1, dx2;
    std::vector<double> is1, is2;
    kernels::LayerNormRows(logits, gamma, beta, 1e-6, y1, xh1, is1);
    kernels::reference::LayerNormRows(logits, gamma, beta, 1e-6, y2, xh2, is2);
    EXPECT_LT((y1 - y2).cwiseAbs().maxCoeff(), 1e-12);
    Matrix dg1 = Matrix::Zero(1, n), dg2 = dg1, db1 = dg1, db2 = dg1;
    kernels::LayerNormRowsBackward(dy, xh1, is1, gamma, dx1, dg1, db1);
    kernels::reference::LayerNormRowsBackward(dy, xh2, is2, gamma, dx2, dg2,
                                              db2);
    EXPECT_LT((dx1 - dx2).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((dg1 - dg2).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace
}  // namespace bcfp::nn
