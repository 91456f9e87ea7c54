#ifndef BCFP_NN_CHECKPOINT_H_
#define BCFP_NN_CHECKPOINT_H_

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "bcfp/nn/graph.h"

namespace bcfp::nn {

inline constexpr int kCheckpointVersion = 1;

// {"format": "bcfp-checkpoint", "version": 1, "tensors": [{"name", "shape",
// "data"}]}. Doubles are written with round-trip precision.
nlohmann::json CheckpointToJson(std::span<const Parameter* const> params);

// Copies tensors into |params| by name. Throws kSchemaError on a missing
// tensor, shape mismatch, unknown version or extra tensors.
void CheckpointFromJson(const nlohmann::json& j,
                        std::span<Parameter* const> params);

}  // namespace bcfp::nn

#endif  // BCFP_NN_CHECKPOINT_H_
