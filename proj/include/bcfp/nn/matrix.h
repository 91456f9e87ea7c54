#ifndef BCFP_NN_MATRIX_H_
#define BCFP_NN_MATRIX_H_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace bcfp::nn {

// Every tensor in the model is a row-major 2-D array of doubles; sequences
// are L x d, vectors are 1 x d.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Per-position validity: 1 for a real token, 0 for PAD.
using Mask = std::vector<uint8_t>;

}  // namespace bcfp::nn

#endif  // BCFP_NN_MATRIX_H_
