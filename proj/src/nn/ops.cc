#include "bcfp/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "bcfp/error.h"
#include "bcfp/nn/kernels.h"
#include "bcfp/random.h"

namespace bcfp::nn {

namespace {

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    Fail(ErrorCode::kShapeMismatch, std::string(op) + ": shapes differ");
}

void RequireMaskLength(const Mask& mask, Eigen::Index rows, const char* op) {
  if (mask.size() != static_cast<size_t>(rows))
    Fail(ErrorCode::kShapeMismatch, std::string(op) + ": mask length");
}

}  // namespace

Var MatMul(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.rows())
    Fail(ErrorCode::kShapeMismatch, "matmul inner dimensions");
  Matrix out;
  kernels::Gemm(av, false, bv, false, out);
  return g.Emit("matmul", std::move(out), {a, b},
                [a, b](Graph& g, const Matrix& dy) {
                  if (g.requires_grad(a))
                    kernels::Gemm(dy, false, g.value(b), true,
                                  g.mutable_grad(a), true);
                  if (g.requires_grad(b))
                    kernels::Gemm(g.value(a), true, dy, false,
                                  g.mutable_grad(b), true);
                });
}

Var MatMulNT(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.cols())
    Fail(ErrorCode::kShapeMismatch, "matmul_nt inner dimensions");
  Matrix out;
  kernels::Gemm(av, false, bv, true, out);
  return g.Emit("matmul_nt", std::move(out), {a, b},
                [a, b](Graph& g, const Matrix& dy) {
                  if (g.requires_grad(a))
                    kernels::Gemm(dy, false, g.value(b), false,
                                  g.mutable_grad(a), true);
                  if (g.requires_grad(b))
                    kernels::Gemm(dy, true, g.value(a), false,
                                  g.mutable_grad(b), true);
                });
}

Var Add(Graph& g, Var a, Var b) {
  RequireSameShape(g.value(a), g.value(b), "add");
  Matrix out = g.value(a) + g.value(b);
  return g.Emit("add", std::move(out), {a, b},
                [a, b](Graph& g, const Matrix& dy) {
                  if (g.requires_grad(a))
                    g.mutable_grad(a) += dy;
                  if (g.requires_grad(b))
                    g.mutable_grad(b) += dy;
                });
}

Var AddBias(Graph& g, Var x, Var bias) {
  const Matrix& xv = g.value(x);
  const Matrix& bv = g.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    Fail(ErrorCode::kShapeMismatch, "add_bias: bias must be 1 x cols");
  Matrix out = xv.rowwise() + bv.row(0);
  return g.Emit("add_bias", std::move(out), {x, bias},
                [x, bias](Graph& g, const Matrix& dy) {
                  if (g.requires_grad(x))
                    g.mutable_grad(x) += dy;
                  if (g.requires_grad(bias))
                    g.mutable_grad(bias) += dy.colwise().sum();
                });
}

Var Scale(Graph& g, Var x, double s) {
  Matrix out = g.value(x) * s;
  return g.Emit("scale", std::move(out), {x},
                [x, s](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x) += dy * s;
                });
}

Var LayerNorm(Graph& g, Var x, Var gamma, Var beta, double eps) {
  auto xhat = std::make_shared<Matrix>();
  auto inv_std = std::make_shared<std::vector<double>>();
  Matrix out;
  kernels::LayerNormRows(g.value(x), g.value(gamma), g.value(beta), eps, out,
                         *xhat, *inv_std);
  return g.Emit(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std](Graph& g, const Matrix& dy) {
        const Matrix& gv = g.value(gamma);
        Matrix dx;
        Matrix dgamma = Matrix::Zero(1, gv.cols());
        Matrix dbeta = Matrix::Zero(1, gv.cols());
        kernels::LayerNormRowsBackward(dy, *xhat, *inv_std, gv, dx, dgamma,
                                       dbeta);
        if (g.requires_grad(x))
          g.mutable_grad(x) += dx;
        if (g.requires_grad(gamma))
          g.mutable_grad(gamma) += dgamma;
        if (g.requires_grad(beta))
          g.mutable_grad(beta) += dbeta;
      });
}

Var Softmax(Graph& g, Var logits, const Mask* key_mask) {
  Matrix out;
  kernels::SoftmaxRows(g.value(logits), key_mask, out);
  const Var self = g.NextVar();
  return g.Emit("softmax", std::move(out), {logits},
                [logits, self](Graph& g, const Matrix& dy) {
                  Matrix dx;
                  kernels::SoftmaxRowsBackward(g.value(self), dy, dx);
                  g.mutable_grad(logits) += dx;
                });
}

Var Relu(Graph& g, Var x) {
  Matrix out = g.value(x).cwiseMax(0.0);
  return g.Emit("relu", std::move(out), {x}, [x](Graph& g, const Matrix& dy) {
    g.mutable_grad(x).array() +=
        (g.value(x).array() > 0.0).select(dy.array(), 0.0);
  });
}

Var Sigmoid(Graph& g, Var x) {
  Matrix out = g.value(x).unaryExpr([](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
  });
  const Var self = g.NextVar();
  return g.Emit("sigmoid", std::move(out), {x},
                [x, self](Graph& g, const Matrix& dy) {
                  const Matrix& y = g.value(self);
                  g.mutable_grad(x).array() +=
                      dy.array() * y.array() * (1.0 - y.array());
                });
}

Var Dropout(Graph& g, Var x, double rate, uint64_t seed, bool train) {
  if (!(rate >= 0.0 && rate < 1.0))
    Fail(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  if (!train || rate == 0.0)
    return x;
  const Matrix& xv = g.value(x);
  auto keep = std::make_shared<Matrix>(xv.rows(), xv.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < xv.size(); ++k) {
    keep->data()[k] =
        HashUniform(seed, static_cast<uint64_t>(k)) >= rate ? scale : 0.0;
  }
  Matrix out = xv.cwiseProduct(*keep);
  return g.Emit("dropout", std::move(out), {x},
                [x, keep](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x) += dy.cwiseProduct(*keep);
                });
}

Var EmbeddingLookup(Graph& g, Var table, std::span<const int32_t> ids) {
  const Matrix& t = g.value(table);
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      Fail(ErrorCode::kUnknownTokenId,
           "token id " + std::to_string(ids[i]) + " outside vocabulary of " +
               std::to_string(t.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int32_t> idv(ids.begin(), ids.end());
  return g.Emit("embedding_lookup", std::move(out), {table},
                [table, idv = std::move(idv)](Graph& g, const Matrix& dy) {
                  Matrix& gt = g.mutable_grad(table);
                  for (size_t i = 0; i < idv.size(); ++i)
                    gt.row(idv[i]) += dy.row(static_cast<Eigen::Index>(i));
                });
}

Var Conv1dK2S2(Graph& g, Var x, Var weight, Var bias) {
  const Matrix& xv = g.value(x);
  const Matrix& wv = g.value(weight);
  const Matrix& bv = g.value(bias);
  const Eigen::Index d_in = xv.cols();
  const Eigen::Index out_len = (xv.rows() + 1) / 2;
  if (wv.rows() != 2 * d_in || bv.rows() != 1 || bv.cols() != wv.cols())
    Fail(ErrorCode::kShapeMismatch, "conv1d weight/bias shape");
  // Row-major storage makes each stride-2 pair one contiguous 2*d_in row.
  Matrix pairs = Matrix::Zero(out_len, 2 * d_in);
  std::copy(xv.data(), xv.data() + xv.size(), pairs.data());
  Matrix out;
  kernels::Gemm(pairs, false, wv, false, out);
  out.rowwise() += bv.row(0);
  auto pairs_ptr = std::make_shared<Matrix>(std::move(pairs));
  return g.Emit(
      "conv1d", std::move(out), {x, weight, bias},
      [x, weight, bias, pairs_ptr](Graph& g, const Matrix& dy) {
        if (g.requires_grad(weight))
          kernels::Gemm(*pairs_ptr, true, dy, false, g.mutable_grad(weight),
                        true);
        if (g.requires_grad(bias))
          g.mutable_grad(bias) += dy.colwise().sum();
        if (g.requires_grad(x)) {
          Matrix dpairs;
          kernels::Gemm(dy, false, g.value(weight), true, dpairs);
          Matrix& gx = g.mutable_grad(x);
          Eigen::Map<Eigen::VectorXd>(gx.data(), gx.size()) +=
              Eigen::Map<const Eigen::VectorXd>(dpairs.data(), gx.size());
        }
      });
}

Mask DownsampleMask(const Mask& mask) {
  Mask out((mask.size() + 1) / 2, 0);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i])
      out[i / 2] = 1;
  }
  return out;
}

Var GlobalAveragePool(Graph& g, Var x, const Mask& mask) {
  const Matrix& xv = g.value(x);
  RequireMaskLength(mask, xv.rows(), "global_average_pool");
  size_t count = 0;
  Matrix out = Matrix::Zero(1, xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    if (mask[static_cast<size_t>(i)]) {
      out += xv.row(i);
      ++count;
    }
  }
  const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
  out *= inv;
  return g.Emit("global_average_pool", std::move(out), {x},
                [x, mask, inv](Graph& g, const Matrix& dy) {
                  Matrix& gx = g.mutable_grad(x);
                  for (Eigen::Index i = 0; i < gx.rows(); ++i) {
                    if (mask[static_cast<size_t>(i)])
                      gx.row(i) += dy.row(0) * inv;
                  }
                });
}

Var MaskRows(Graph& g, Var x, const Mask& mask) {
  const Matrix& xv = g.value(x);
  RequireMaskLength(mask, xv.rows(), "mask_rows");
  Matrix out = xv;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!mask[static_cast<size_t>(i)])
      out.row(i).setZero();
  }
  return g.Emit("mask_rows", std::move(out), {x},
                [x, mask](Graph& g, const Matrix& dy) {
                  Matrix& gx = g.mutable_grad(x);
                  for (Eigen::Index i = 0; i < gx.rows(); ++i) {
                    if (mask[static_cast<size_t>(i)])
                      gx.row(i) += dy.row(i);
                  }
                });
}

Var SliceCols(Graph& g, Var x, Eigen::Index begin, Eigen::Index count) {
  const Matrix& xv = g.value(x);
  if (begin < 0 || count < 0 || begin + count > xv.cols())
    Fail(ErrorCode::kShapeMismatch, "slice_cols out of range");
  Matrix out = xv.middleCols(begin, count);
  return g.Emit("slice_cols", std::move(out), {x},
                [x, begin, count](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x).middleCols(begin, count) += dy;
                });
}

Var ConcatCols(Graph& g, std::span<const Var> parts) {
  if (parts.empty())
    Fail(ErrorCode::kShapeMismatch, "concat_cols of nothing");
  const Eigen::Index rows = g.value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (g.value(p).rows() != rows)
      Fail(ErrorCode::kShapeMismatch, "concat_cols row counts differ");
    cols += g.value(p).cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, g.value(p).cols()) = g.value(p);
    at += g.value(p).cols();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return g.Emit("concat_cols", std::move(out), parts,
                [pv = std::move(pv)](Graph& g, const Matrix& dy) {
                  Eigen::Index at = 0;
                  for (Var p : pv) {
                    const Eigen::Index c = g.value(p).cols();
                    if (g.requires_grad(p))
                      g.mutable_grad(p) += dy.middleCols(at, c);
                    at += c;
                  }
                });
}

Var SliceRows(Graph& g, Var x, Eigen::Index begin, Eigen::Index count) {
  const Matrix& xv = g.value(x);
  if (begin < 0 || count < 0 || begin + count > xv.rows())
    Fail(ErrorCode::kShapeMismatch, "slice_rows out of range");
  Matrix out = xv.middleRows(begin, count);
  return g.Emit("slice_rows", std::move(out), {x},
                [x, begin, count](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x).middleRows(begin, count) += dy;
                });
}

Var ConcatRows(Graph& g, std::span<const Var> parts) {
  if (parts.empty())
    Fail(ErrorCode::kShapeMismatch, "concat_rows of nothing");
  const Eigen::Index cols = g.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (g.value(p).cols() != cols)
      Fail(ErrorCode::kShapeMismatch, "concat_rows column counts differ");
    rows += g.value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, g.value(p).rows()) = g.value(p);
    at += g.value(p).rows();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return g.Emit("concat_rows", std::move(out), parts,
                [pv = std::move(pv)](Graph& g, const Matrix& dy) {
                  Eigen::Index at = 0;
                  for (Var p : pv) {
                    const Eigen::Index r = g.value(p).rows();
                    if (g.requires_grad(p))
                      g.mutable_grad(p) += dy.middleRows(at, r);
                    at += r;
                  }
                });
}

Var SegmentMeanPool(Graph& g, Var x, std::span<const Eigen::Index> lengths) {
  const Matrix& xv = g.value(x);
  Eigen::Index total = 0;
  for (Eigen::Index n : lengths) {
    if (n <= 0)
      Fail(ErrorCode::kShapeMismatch, "segment_mean_pool: empty segment");
    total += n;
  }
  if (total != xv.rows())
    Fail(ErrorCode::kShapeMismatch, "segment_mean_pool: lengths vs rows");
  Matrix out(static_cast<Eigen::Index>(lengths.size()), xv.cols());
  Eigen::Index at = 0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        xv.middleRows(at, lengths[i]).colwise().sum() /
        static_cast<double>(lengths[i]);
    at += lengths[i];
  }
  std::vector<Eigen::Index> lv(lengths.begin(), lengths.end());
  return g.Emit("segment_mean_pool", std::move(out), {x},
                [x, lv = std::move(lv)](Graph& g, const Matrix& dy) {
                  Matrix& gx = g.mutable_grad(x);
                  Eigen::Index at = 0;
                  for (size_t i = 0; i < lv.size(); ++i) {
                    const double inv = 1.0 / static_cast<double>(lv[i]);
                    gx.middleRows(at, lv[i]).rowwise() +=
                        dy.row(static_cast<Eigen::Index>(i)) * inv;
                    at += lv[i];
                  }
                });
}

Var BceWithLogits(Graph& g, Var logits, std::span<const double> labels) {
  const Matrix& z = g.value(logits);
  if (z.cols() != 1 || z.rows() != static_cast<Eigen::Index>(labels.size()) ||
      labels.empty()) {
    Fail(ErrorCode::kShapeMismatch, "bce: logits must be n x 1 with n labels");
  }
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const double v = z(static_cast<Eigen::Index>(i), 0);
    loss += std::max(v, 0.0) - v * labels[i] + std::log1p(std::exp(-std::abs(v)));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  std::vector<double> lv(labels.begin(), labels.end());
  return g.Emit("bce_with_logits", std::move(out), {logits},
                [logits, lv = std::move(lv), n](Graph& g, const Matrix& dy) {
                  const Matrix& z = g.value(logits);
                  Matrix& gz = g.mutable_grad(logits);
                  for (Eigen::Index i = 0; i < z.rows(); ++i) {
                    const double v = z(i, 0);
                    const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                            : std::exp(v) / (1.0 + std::exp(v));
                    gz(i, 0) += dy(0, 0) * (s - lv[static_cast<size_t>(i)]) / n;
                  }
                });
}

Var SumAll(Graph& g, Var x) {
  Matrix out(1, 1);
  out(0, 0) = g.value(x).sum();
  return g.Emit("sum_all", std::move(out), {x},
                [x](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x).array() += dy(0, 0);
                });
}

Var WeightedSum(Graph& g, Var x, const Matrix& w) {
  RequireSameShape(g.value(x), w, "weighted_sum");
  Matrix out(1, 1);
  out(0, 0) = g.value(x).cwiseProduct(w).sum();
  return g.Emit("weighted_sum", std::move(out), {x},
                [x, w](Graph& g, const Matrix& dy) {
                  g.mutable_grad(x) += w * dy(0, 0);
                });
}

Matrix SinusoidalPositions(Eigen::Index length, Eigen::Index dim) {
  if (dim % 2 != 0)
    Fail(ErrorCode::kOddDimension, "positional encoding needs an even dim");
  Matrix pe(length, dim);
  for (Eigen::Index i = 0; i < dim / 2; ++i) {
    const double freq =
        std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    for (Eigen::Index pos = 0; pos < length; ++pos) {
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Var SegmentAttention(Graph& g, Var q, Var k, Var v,
                     std::span<const Eigen::Index> lengths, int heads) {
  const Matrix& qv = g.value(q);
  const Matrix& kv = g.value(k);
  const Matrix& vv = g.value(v);
  const Eigen::Index d = qv.cols();
  if (heads <= 0 || d % heads != 0)
    Fail(ErrorCode::kShapeMismatch, "model dim not divisible by heads");
  if (kv.rows() != qv.rows() || vv.rows() != qv.rows() || kv.cols() != d ||
      vv.cols() != d)
    Fail(ErrorCode::kShapeMismatch, "segment_attention q/k/v shapes differ");
  Eigen::Index total = 0;
  for (Eigen::Index n : lengths) {
    if (n <= 0)
      Fail(ErrorCode::kShapeMismatch, "segment_attention: empty segment");
    total += n;
  }
  if (total != qv.rows())
    Fail(ErrorCode::kShapeMismatch, "segment_attention: lengths vs rows");
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Attention weights per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(lengths.size() * static_cast<size_t>(heads));
  Matrix out(qv.rows(), d);
  Eigen::Index at = 0;
  for (Eigen::Index n : lengths) {
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c = h * dh;
      Matrix s = (qv.block(at, c, n, dh) * kv.block(at, c, n, dh).transpose()) *
                 scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
      }
      out.block(at, c, n, dh).noalias() = s * vv.block(at, c, n, dh);
      probs->push_back(std::move(s));
    }
    at += n;
  }
  std::vector<Eigen::Index> lv(lengths.begin(), lengths.end());
  return g.Emit(
      "segment_attention", std::move(out), {q, k, v},
      [q, k, v, heads, dh, scale, probs, lv = std::move(lv)](Graph& g,
                                                            const Matrix& dy) {
        const Matrix& qv = g.value(q);
        const Matrix& kv = g.value(k);
        const Matrix& vv = g.value(v);
        const bool gq = g.requires_grad(q);
        const bool gk = g.requires_grad(k);
        const bool gv = g.requires_grad(v);
        Matrix* dq = gq ? &g.mutable_grad(q) : nullptr;
        Matrix* dk = gk ? &g.mutable_grad(k) : nullptr;
        Matrix* dv = gv ? &g.mutable_grad(v) : nullptr;
        Eigen::Index at = 0;
        size_t idx = 0;
        for (Eigen::Index n : lv) {
          for (int h = 0; h < heads; ++h, ++idx) {
            const Eigen::Index c = h * dh;
            const Matrix& pm = (*probs)[idx];
            const auto dyb = dy.block(at, c, n, dh);
            if (dv)
              dv->block(at, c, n, dh).noalias() += pm.transpose() * dyb;
            if (!dq && !dk)
              continue;
            Matrix ds = dyb * vv.block(at, c, n, dh).transpose();
            const Eigen::VectorXd dot = (ds.array() * pm.array()).rowwise().sum();
            ds = (pm.array() * (ds.array().colwise() - dot.array())).matrix() *
                 scale;
            if (dq)
              dq->block(at, c, n, dh).noalias() += ds * kv.block(at, c, n, dh);
            if (dk)
              dk->block(at, c, n, dh).noalias() +=
                  ds.transpose() * qv.block(at, c, n, dh);
          }
          at += n;
        }
      });
}

AttentionResult MultiHeadAttention(Graph& g, Var x, const AttentionVars& p,
                                   int heads, const Mask& mask) {
  const Eigen::Index d = g.value(x).cols();
  if (heads <= 0 || d % heads != 0)
    Fail(ErrorCode::kShapeMismatch, "model dim not divisible by heads");
  RequireMaskLength(mask, g.value(x).rows(), "attention");
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Var q = AddBias(g, MatMul(g, x, p.wq), p.bq);
  const Var k = AddBias(g, MatMul(g, x, p.wk), p.bk);
  const Var v = AddBias(g, MatMul(g, x, p.wv), p.bv);
  AttentionResult result;
  std::vector<Var> head_out;
  for (int h = 0; h < heads; ++h) {
    const Var qh = SliceCols(g, q, h * dh, dh);
    const Var kh = SliceCols(g, k, h * dh, dh);
    const Var vh = SliceCols(g, v, h * dh, dh);
    const Var w = Softmax(g, Scale(g, MatMulNT(g, qh, kh), scale), &mask);
    result.weights.push_back(w);
    head_out.push_back(MatMul(g, w, vh));
  }
  const Var concat = heads == 1 ? head_out[0] : ConcatCols(g, head_out);
  result.output = AddBias(g, MatMul(g, concat, p.wo), p.bo);
  return result;
}

}  // namespace bcfp::nn
