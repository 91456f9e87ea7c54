#ifndef BCFP_TESTS_PRIMITIVE_CHECKS_H_
#define BCFP_TESTS_PRIMITIVE_CHECKS_H_

#include <string>
#include <vector>

#include "bcfp/nn/ops.h"
#include "gradcheck.h"

namespace bcfp::testing {

struct PrimitiveCase {
  std::string name;
  ScalarFn fn;
  std::vector<nn::Matrix> inputs;
};

inline nn::Mask RandomMask(Rng& rng, size_t n) {
  nn::Mask m(n);
  for (auto& b : m)
    b = rng.Bernoulli(0.7);
  m[rng.Below(n)] = 1;
  return m;
}

// One randomized instance of every differentiable primitive. Each output is
// reduced to a scalar through a random projection.
inline std::vector<PrimitiveCase> RandomPrimitiveCases(Rng& rng) {
  using nn::Graph;
  using nn::Matrix;
  using nn::Var;
  const Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.Below(5));
  const Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.Below(5));
  const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.Below(4));
  auto proj = [&rng](Eigen::Index rows, Eigen::Index cols,
                     double scale = 1.0) {
    return RandomMatrix(rng, rows, cols, scale);
  };
  std::vector<PrimitiveCase> cases;

  Matrix w_rc = proj(r, c);
  cases.push_back({"matmul",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::MatMul(g, v[0], v[1]), w_rc);
                   },
                   {proj(r, k), proj(k, c)}});
  Matrix w_rr = proj(r, r);
  cases.push_back({"matmul_nt",
                   [w_rr](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::MatMulNT(g, v[0], v[1]),
                                            w_rr);
                   },
                   {proj(r, k), proj(r, k)}});
  cases.push_back({"add",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Add(g, v[0], v[1]), w_rc);
                   },
                   {proj(r, c), proj(r, c)}});
  cases.push_back({"add_bias",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::AddBias(g, v[0], v[1]), w_rc);
                   },
                   {proj(r, c), proj(1, c)}});
  cases.push_back({"scale",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Scale(g, v[0], -1.7), w_rc);
                   },
                   {proj(r, c)}});
  cases.push_back({"layer_norm",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::LayerNorm(g, v[0], v[1], v[2]), w_rc);
                   },
                   {proj(r, c), proj(1, c), proj(1, c)}});
  const nn::Mask key_mask = RandomMask(rng, static_cast<size_t>(c));
  cases.push_back({"softmax",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Softmax(g, v[0]), w_rc);
                   },
                   {proj(r, c)}});
  cases.push_back({"softmax_masked",
                   [w_rc, key_mask](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Softmax(g, v[0], &key_mask),
                                            w_rc);
                   },
                   {proj(r, c)}});
  cases.push_back({"relu",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Relu(g, v[0]), w_rc);
                   },
                   {proj(r, c)}});
  cases.push_back({"sigmoid",
                   [w_rc](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::Sigmoid(g, v[0]), w_rc);
                   },
                   {proj(r, c)}});
  const uint64_t drop_seed = rng.Next();
  cases.push_back({"dropout",
                   [w_rc, drop_seed](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::Dropout(g, v[0], 0.3, drop_seed, true), w_rc);
                   },
                   {proj(r, c)}});
  std::vector<int32_t> ids;
  for (Eigen::Index i = 0; i < r; ++i)
    ids.push_back(static_cast<int32_t>(rng.Below(static_cast<uint64_t>(k))));
  cases.push_back({"embedding_lookup",
                   [w_rc, ids](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::EmbeddingLookup(g, v[0], ids), w_rc);
                   },
                   {proj(k, c)}});
  const Eigen::Index conv_len = 2 + static_cast<Eigen::Index>(rng.Below(6));
  Matrix w_conv = proj((conv_len + 1) / 2, k);
  cases.push_back({"conv1d",
                   [w_conv](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::Conv1dK2S2(g, v[0], v[1], v[2]), w_conv);
                   },
                   {proj(conv_len, c), proj(2 * c, k), proj(1, k)}});
  const nn::Mask row_mask = RandomMask(rng, static_cast<size_t>(r));
  Matrix w_1c = proj(1, c);
  cases.push_back({"global_average_pool",
                   [w_1c, row_mask](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::GlobalAveragePool(g, v[0], row_mask), w_1c);
                   },
                   {proj(r, c)}});
  cases.push_back({"mask_rows",
                   [w_rc, row_mask](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::MaskRows(g, v[0], row_mask),
                                            w_rc);
                   },
                   {proj(r, c)}});
  Matrix w_slice = proj(r, 1);
  cases.push_back({"slice_cols",
                   [w_slice](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::SliceCols(g, v[0], 1, 1),
                                            w_slice);
                   },
                   {proj(r, c)}});
  Matrix w_cat = proj(r, c + k);
  cases.push_back({"concat_cols",
                   [w_cat](Graph& g, std::span<const Var> v) {
                     const Var parts[] = {v[0], v[1]};
                     return nn::WeightedSum(g, nn::ConcatCols(g, parts), w_cat);
                   },
                   {proj(r, c), proj(r, k)}});
  Matrix w_rows = proj(r + k, c);
  cases.push_back({"concat_rows",
                   [w_rows](Graph& g, std::span<const Var> v) {
                     const Var parts[] = {v[0], v[1]};
                     return nn::WeightedSum(g, nn::ConcatRows(g, parts),
                                            w_rows);
                   },
                   {proj(r, c), proj(k, c)}});
  Matrix w_srow = proj(1, c);
  cases.push_back({"slice_rows",
                   [w_srow](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(g, nn::SliceRows(g, v[0], 1, 1),
                                            w_srow);
                   },
                   {proj(r, c)}});
  const std::vector<Eigen::Index> segs = {1, r, 2};
  Matrix w_seg = proj(3, c);
  cases.push_back({"segment_mean_pool",
                   [w_seg, segs](Graph& g, std::span<const Var> v) {
                     return nn::WeightedSum(
                         g, nn::SegmentMeanPool(g, v[0], segs), w_seg);
                   },
                   {proj(r + 3, c)}});
  std::vector<double> labels;
  for (Eigen::Index i = 0; i < r; ++i)
    labels.push_back(static_cast<double>(rng.Below(2)));
  cases.push_back({"bce_with_logits",
                   [labels](Graph& g, std::span<const Var> v) {
                     return nn::Scale(g, nn::BceWithLogits(g, v[0], labels),
                                      3.0);
                   },
                   {proj(r, 1, 3.0)}});
  cases.push_back({"sum_all",
                   [](Graph& g, std::span<const Var> v) {
                     return nn::SumAll(g, nn::Sigmoid(g, v[0]));
                   },
                   {proj(r, c)}});

  const int heads = 1 + static_cast<int>(rng.Below(3));
  const Eigen::Index d = heads * (1 + static_cast<Eigen::Index>(rng.Below(3)));
  const Eigen::Index len = 1 + static_cast<Eigen::Index>(rng.Below(6));
  const nn::Mask attn_mask = RandomMask(rng, static_cast<size_t>(len));
  Matrix w_attn = proj(len, d);
  cases.push_back({"multi_head_attention",
                   [w_attn, heads, attn_mask](Graph& g,
                                              std::span<const Var> v) {
                     const nn::AttentionVars p{v[1], v[2], v[3], v[4],
                                               v[5], v[6], v[7], v[8]};
                     return nn::WeightedSum(
                         g,
                         nn::MultiHeadAttention(g, v[0], p, heads, attn_mask)
                             .output,
                         w_attn);
                   },
                   {proj(len, d), proj(d, d, 0.5), proj(1, d), proj(d, d, 0.5),
                    proj(1, d), proj(d, d, 0.5), proj(1, d), proj(d, d, 0.5),
                    proj(1, d)}});
  const std::vector<Eigen::Index> attn_segs = {len, 1, 3};
  Matrix w_seg_attn = proj(len + 4, d);
  cases.push_back({"segment_attention",
                   [w_seg_attn, heads, attn_segs](Graph& g,
                                                  std::span<const Var> v) {
                     return nn::WeightedSum(
                         g,
                         nn::SegmentAttention(g, v[0], v[1], v[2], attn_segs,
                                              heads),
                         w_seg_attn);
                   },
                   {proj(len + 4, d), proj(len + 4, d), proj(len + 4, d)}});
  return cases;
}

}  // namespace bcfp::testing

#endif  // BCFP_TESTS_PRIMITIVE_CHECKS_H_
