#ifndef BCFP_NN_ADAM_H_
#define BCFP_NN_ADAM_H_

#include <span>

#include "bcfp/nn/graph.h"

namespace bcfp::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update per parameter, then zeroes the gradients.
void AdamStep(std::span<Parameter* const> params, const AdamConfig& cfg);

}  // namespace bcfp::nn

#endif  // BCFP_NN_ADAM_H_
