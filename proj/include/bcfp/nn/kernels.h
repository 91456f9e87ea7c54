#ifndef BCFP_NN_KERNELS_H_
#define BCFP_NN_KERNELS_H_

#include <vector>

#include "bcfp/nn/matrix.h"

// Numeric kernels behind the autodiff ops. The top-level versions are the
// production path (Eigen GEMM, OpenMP over rows); |reference| holds plain
// serial loops kept as an oracle for tests and the kernel benchmark.
namespace bcfp::nn::kernels {

// c = op(a) * op(b) (+ c when |accumulate|), op = transpose when flagged.
void Gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, bool accumulate = false);

// Row-wise softmax. Columns with key_mask[j] == 0 get probability 0. A row
// whose keys are all masked is all zeros. |key_mask| may be null.
void SoftmaxRows(const Matrix& logits, const Mask* key_mask, Matrix& out);

// dx = y * (dy - rowsum(dy * y)).
void SoftmaxRowsBackward(const Matrix& y, const Matrix& dy, Matrix& dx);

// Per-row normalization. Fills |xhat| and |inv_std| for the backward pass.
void LayerNormRows(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                   double eps, Matrix& y, Matrix& xhat,
                   std::vector<double>& inv_std);

// Accumulates into dgamma/dbeta; overwrites dx.
void LayerNormRowsBackward(const Matrix& dy, const Matrix& xhat,
                           const std::vector<double>& inv_std,
                           const Matrix& gamma, Matrix& dx, Matrix& dgamma,
                           Matrix& dbeta);

namespace reference {

void Gemm(const Matrix& a, bool transpose_a, const Matrix& b, bool transpose_b,
          Matrix& c, bool accumulate = false);
void SoftmaxRows(const Matrix& logits, const Mask* key_mask, Matrix& out);
void SoftmaxRowsBackward(const Matrix& y, const Matrix& dy, Matrix& dx);
void LayerNormRows(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                   double eps, Matrix& y, Matrix& xhat,
                   std::vector<double>& inv_std);
void LayerNormRowsBackward(const Matrix& dy, const Matrix& xhat,
                           const std::vector<double>& inv_std,
                           const Matrix& gamma, Matrix& dx, Matrix& dgamma,
                           Matrix& dbeta);

}  // namespace reference

}  // namespace bcfp::nn::kernels

#endif  // BCFP_NN_KERNELS_H_
