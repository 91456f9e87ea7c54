#ifndef BCFP_NN_OPS_H_
#define BCFP_NN_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "bcfp/nn/graph.h"
#include "bcfp/nn/matrix.h"

// Differentiable primitives. Each op validates shapes (kShapeMismatch),
// computes its value and registers a backward rule on the graph.
namespace bcfp::nn {

inline constexpr double kLayerNormEps = 1e-6;

// a * b.
Var MatMul(Graph& g, Var a, Var b);
// a * b^T.
Var MatMulNT(Graph& g, Var a, Var b);
// Elementwise a + b (same shape).
Var Add(Graph& g, Var a, Var b);
// x + bias with a 1 x n bias broadcast over rows.
Var AddBias(Graph& g, Var x, Var bias);
Var Scale(Graph& g, Var x, double s);
// Row-wise layer normalization with 1 x n gain and bias.
Var LayerNorm(Graph& g, Var x, Var gamma, Var beta,
              double eps = kLayerNormEps);
// Row-wise softmax; keys with key_mask[j] == 0 get weight 0.
Var Softmax(Graph& g, Var logits, const Mask* key_mask = nullptr);
Var Relu(Graph& g, Var x);
Var Sigmoid(Graph& g, Var x);
// Inverted dropout. Identity when !train or rate == 0. The keep decision for
// element k is HashUniform(seed, k) >= rate.
Var Dropout(Graph& g, Var x, double rate, uint64_t seed, bool train);
// Gathers rows of |table| (V x d). Throws kUnknownTokenId for ids >= V.
Var EmbeddingLookup(Graph& g, Var table, std::span<const int32_t> ids);
// Kernel 2, stride 2 convolution along rows. weight is (2*d_in) x d_out,
// bias 1 x d_out. An odd trailing row is paired with a zero row, so the
// output has ceil(L/2) rows.
Var Conv1dK2S2(Graph& g, Var x, Var weight, Var bias);
// OR over each stride-2 pair, matching Conv1dK2S2's output length.
Mask DownsampleMask(const Mask& mask);
// Mean of the rows with mask 1, as a 1 x d row. All-masked input gives zeros.
Var GlobalAveragePool(Graph& g, Var x, const Mask& mask);
// Zeroes rows whose mask is 0.
Var MaskRows(Graph& g, Var x, const Mask& mask);
Var SliceCols(Graph& g, Var x, Eigen::Index begin, Eigen::Index count);
Var ConcatCols(Graph& g, std::span<const Var> parts);
Var SliceRows(Graph& g, Var x, Eigen::Index begin, Eigen::Index count);
Var ConcatRows(Graph& g, std::span<const Var> parts);
// Row i of the output is the mean of the i-th run of |lengths[i]| input rows.
// Lengths must be positive and sum to the row count.
Var SegmentMeanPool(Graph& g, Var x, std::span<const Eigen::Index> lengths);
// Mean binary cross-entropy of sigmoid(logits) against labels in {0, 1}.
// |logits| is n x 1.
Var BceWithLogits(Graph& g, Var logits, std::span<const double> labels);
Var SumAll(Graph& g, Var x);
// sum(x .* w), used as a random projection in gradient checks.
Var WeightedSum(Graph& g, Var x, const Matrix& w);

// Sinusoidal position table, L x d. Throws kOddDimension for odd d.
Matrix SinusoidalPositions(Eigen::Index length, Eigen::Index dim);

struct AttentionVars {
  Var wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttentionResult {
  Var output;
  // One L x L weight matrix per head.
  std::vector<Var> weights;
};

// Multi-head scaled dot-product self-attention over the rows of x (L x d).
// Weights are d x d, biases 1 x d. Keys with mask 0 are excluded.
// Scaled dot-product attention applied independently to each run of rows
// given by |lengths|, per head, without masking. q, k and v are already
// projected; the result is the concatenated per-head context.
Var SegmentAttention(Graph& g, Var q, Var k, Var v,
                     std::span<const Eigen::Index> lengths, int heads);

AttentionResult MultiHeadAttention(Graph& g, Var x, const AttentionVars& p,
                                   int heads, const Mask& mask);

}  // namespace bcfp::nn

#endif  // BCFP_NN_OPS_H_
