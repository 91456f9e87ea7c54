#include "bcfp/nn/adam.h"

#include <cmath>

namespace bcfp::nn {

void AdamStep(std::span<Parameter* const> params, const AdamConfig& cfg) {
  for (Parameter* p : params) {
    ++p->step;
    const double t = static_cast<double>(p->step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    p->m = cfg.beta1 * p->m + (1.0 - cfg.beta1) * p->grad;
    p->v = cfg.beta2 * p->v + (1.0 - cfg.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= cfg.lr * (p->m.array() / c1) /
                        ((p->v.array() / c2).sqrt() + cfg.eps);
    p->ZeroGrad();
  }
}

}  // namespace bcfp::nn
