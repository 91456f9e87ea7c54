#include "bcfp/nn/checkpoint.h"

#include <map>

#include "bcfp/error.h"

namespace bcfp::nn {

nlohmann::json CheckpointToJson(std::span<const Parameter* const> params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const Parameter* p : params) {
    std::vector<double> data(p->value.data(),
                             p->value.data() + p->value.size());
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"data", std::move(data)}});
  }
  return {{"format", "bcfp-checkpoint"},
          {"version", kCheckpointVersion},
          {"tensors", std::move(tensors)}};
}

void CheckpointFromJson(const nlohmann::json& j,
                        std::span<Parameter* const> params) {
  try {
    if (j.at("format") != "bcfp-checkpoint")
      Fail(ErrorCode::kSchemaError, "not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      Fail(ErrorCode::kSchemaError, "unsupported checkpoint version");
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& t : j.at("tensors"))
      by_name[t.at("name").get<std::string>()] = &t;
    if (by_name.size() != params.size())
      Fail(ErrorCode::kSchemaError, "checkpoint tensor count differs");
    for (Parameter* p : params) {
      auto it = by_name.find(p->name);
      if (it == by_name.end())
        Fail(ErrorCode::kSchemaError, "missing tensor " + p->name);
      const auto& t = *it->second;
      const auto shape = t.at("shape").get<std::vector<int64_t>>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != p->value.rows() ||
          shape[1] != p->value.cols() ||
          data.size() != static_cast<size_t>(p->value.size())) {
        Fail(ErrorCode::kSchemaError, "shape mismatch for " + p->name);
      }
      std::copy(data.begin(), data.end(), p->value.data());
      p->ZeroGrad();
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchemaError, std::string("checkpoint: ") + e.what());
  }
}

}  // namespace bcfp::nn
