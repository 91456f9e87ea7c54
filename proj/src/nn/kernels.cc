#include "bcfp/nn/kernels.h"

#include <cmath>
#include <limits>

#include "bcfp/error.h"

namespace bcfp::nn::kernels {

namespace {

void CheckGemmShapes(const Matrix& a, bool ta, const Matrix& b, bool tb,
                     const Matrix& c, bool accumulate) {
  const Eigen::Index k_a = ta ? a.rows() : a.cols();
  const Eigen::Index k_b = tb ? b.cols() : b.rows();
  if (k_a != k_b)
    Fail(ErrorCode::kShapeMismatch, "gemm inner dimensions differ");
  if (accumulate) {
    const Eigen::Index m = ta ? a.cols() : a.rows();
    const Eigen::Index n = tb ? b.rows() : b.cols();
    if (c.rows() != m || c.cols() != n)
      Fail(ErrorCode::kShapeMismatch, "gemm accumulator shape");
  }
}

void CheckSoftmax(const Matrix& logits, const Mask* key_mask) {
  if (key_mask && key_mask->size() != static_cast<size_t>(logits.cols()))
    Fail(ErrorCode::kShapeMismatch, "softmax mask length");
}

}  // namespace

void Gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, bool accumulate) {
  CheckGemmShapes(a, transpose_a, b, transpose_b, c, accumulate);
  const double beta = accumulate ? 1.0 : 0.0;
  if (!accumulate) {
    c.resize(transpose_a ? a.cols() : a.rows(),
             transpose_b ? b.rows() : b.cols());
  }
  auto run = [&](const auto& lhs, const auto& rhs) {
    if (beta == 0.0)
      c.noalias() = lhs * rhs;
    else
      c.noalias() += lhs * rhs;
  };
  if (transpose_a && transpose_b)
    run(a.transpose(), b.transpose());
  else if (transpose_a)
    run(a.transpose(), b);
  else if (transpose_b)
    run(a, b.transpose());
  else
    run(a, b);
}

void SoftmaxRows(const Matrix& logits, const Mask* key_mask, Matrix& out) {
  CheckSoftmax(logits, key_mask);
  out.resize(logits.rows(), logits.cols());
  const Eigen::Index rows = logits.rows();
  const Eigen::Index cols = logits.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* in = logits.data() + i * cols;
    double* o = out.data() + i * cols;
    double max_v = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!key_mask || (*key_mask)[j])
        max_v = std::max(max_v, in[j]);
    }
    if (max_v == -std::numeric_limits<double>::infinity()) {
      std::fill(o, o + cols, 0.0);
      continue;
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double e =
          (!key_mask || (*key_mask)[j]) ? std::exp(in[j] - max_v) : 0.0;
      o[j] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (Eigen::Index j = 0; j < cols; ++j)
      o[j] *= inv;
  }
}

void SoftmaxRowsBackward(const Matrix& y, const Matrix& dy, Matrix& dx) {
  dx.resize(y.rows(), y.cols());
  const Eigen::Index rows = y.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double dot = y.row(i).dot(dy.row(i));
    dx.row(i) = (y.row(i).array() * (dy.row(i).array() - dot)).matrix();
  }
}

void LayerNormRows(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                   double eps, Matrix& y, Matrix& xhat,
                   std::vector<double>& inv_std) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index n = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 ||
      beta.cols() != n) {
    Fail(ErrorCode::kShapeMismatch, "layer norm gain/bias shape");
  }
  y.resize(rows, n);
  xhat.resize(rows, n);
  inv_std.assign(static_cast<size_t>(rows), 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = inv;
    xhat.row(i) = (x.row(i).array() - mean) * inv;
    y.row(i) = xhat.row(i).cwiseProduct(gamma) + beta;
  }
}

void LayerNormRowsBackward(const Matrix& dy, const Matrix& xhat,
                           const std::vector<double>& inv_std,
                           const Matrix& gamma, Matrix& dx, Matrix& dgamma,
                           Matrix& dbeta) {
  const Eigen::Index rows = dy.rows();
  const double n = static_cast<double>(dy.cols());
  dx.resize(rows, dy.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gamma);
    const double sum = dxhat.sum();
    const double dot = dxhat.dot(xhat.row(i));
    dx.row(i) = (inv_std[static_cast<size_t>(i)] / n) *
                (n * dxhat.array() - sum - xhat.row(i).array() * dot).matrix();
  }
  dgamma += dy.cwiseProduct(xhat).colwise().sum();
  dbeta += dy.colwise().sum();
}

namespace reference {

void Gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, bool accumulate) {
  CheckGemmShapes(a, transpose_a, b, transpose_b, c, accumulate);
  const Eigen::Index m = transpose_a ? a.cols() : a.rows();
  const Eigen::Index k = transpose_a ? a.rows() : a.cols();
  const Eigen::Index n = transpose_b ? b.rows() : b.cols();
  if (!accumulate)
    c = Matrix::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Eigen::Index p = 0; p < k; ++p) {
        const double av = transpose_a ? a(p, i) : a(i, p);
        const double bv = transpose_b ? b(j, p) : b(p, j);
        sum += av * bv;
      }
      c(i, j) += sum;
    }
  }
}

void SoftmaxRows(const Matrix& logits, const Mask* key_mask, Matrix& out) {
  CheckSoftmax(logits, key_mask);
  out = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double max_v = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (!key_mask || (*key_mask)[j])
        max_v = std::max(max_v, logits(i, j));
    }
    if (!std::isfinite(max_v))
      continue;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (!key_mask || (*key_mask)[j])
        sum += std::exp(logits(i, j) - max_v);
    }
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (!key_mask || (*key_mask)[j])
        out(i, j) = std::exp(logits(i, j) - max_v) / sum;
    }
  }
}

void SoftmaxRowsBackward(const Matrix& y, const Matrix& dy, Matrix& dx) {
  dx = Matrix::Zero(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      dot += y(i, j) * dy(i, j);
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
}

void LayerNormRows(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                   double eps, Matrix& y, Matrix& xhat,
                   std::vector<double>& inv_std) {
  const Eigen::Index n = x.cols();
  y = Matrix::Zero(x.rows(), n);
  xhat = Matrix::Zero(x.rows(), n);
  inv_std.assign(static_cast<size_t>(x.rows()), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = inv;
    for (Eigen::Index j = 0; j < n; ++j) {
      xhat(i, j) = (x(i, j) - mean) * inv;
      y(i, j) = xhat(i, j) * gamma(0, j) + beta(0, j);
    }
  }
}

void LayerNormRowsBackward(const Matrix& dy, const Matrix& xhat,
                           const std::vector<double>& inv_std,
                           const Matrix& gamma, Matrix& dx, Matrix& dgamma,
                           Matrix& dbeta) {
  const Eigen::Index n = dy.cols();
  dx = Matrix::Zero(dy.rows(), n);
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    double sum = 0.0;
    double dot = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = dy(i, j) * gamma(0, j);
      sum += g;
      dot += g * xhat(i, j);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = dy(i, j) * gamma(0, j);
      dx(i, j) = inv_std[static_cast<size_t>(i)] / static_cast<double>(n) *
                 (static_cast<double>(n) * g - sum - xhat(i, j) * dot);
      dgamma(0, j) += dy(i, j) * xhat(i, j);
      dbeta(0, j) += dy(i, j);
    }
  }
}

}  // namespace reference

}  // namespace bcfp::nn::kernels
