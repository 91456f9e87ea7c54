#ifndef BCFP_TRANSFORMER_H_
#define BCFP_TRANSFORMER_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcfp/nn/adam.h"
#include "bcfp/nn/graph.h"
#include "bcfp/nn/ops.h"

namespace bcfp {

enum class ModelVariant { kFunction, kScript };

std::string_view ModelVariantName(ModelVariant v);
ModelVariant ModelVariantFromName(std::string_view name);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kFunction;
  int vocab_size = 0;
  int embed_dim = 256;
  int num_layers = 1;
  int num_heads = 4;
  int ffn_dim = 512;
  double dropout_rate = 0.1;
  int max_len = 512;
  bool use_conv_frontend = false;
  // Widths of the ReLU layers between pooling and the output neuron.
  std::vector<int> dense_head_dims = {256, 128};

  static ModelConfig FunctionDefaults(int vocab_size);
  static ModelConfig ScriptDefaults(int vocab_size);

  // Throws kInvalidArgument for inconsistent settings.
  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

struct TrainConfig {
  int epochs = 16;
  int batch_size = 128;
  uint64_t seed = 0;
  nn::AdamConfig adam;
  // Stops after an epoch whose mean loss is below this; 0 disables.
  double stop_loss = 0.0;

  static TrainConfig FunctionDefaults();
  static TrainConfig ScriptDefaults();
};

// Sequences padded with kPadId to the longest member; mask[i][j] == 0 marks
// PAD.
struct Batch {
  std::vector<std::vector<int32_t>> ids;
  std::vector<nn::Mask> masks;
};

Batch MakeBatch(std::span<const std::vector<int32_t>> sequences);

struct TrainReport {
  std::vector<double> epoch_loss;
};

class TransformerClassifier {
 public:
  // Parameters drawn from |init_seed|.
  TransformerClassifier(const ModelConfig& config, uint64_t init_seed);

  TransformerClassifier(const TransformerClassifier&) = delete;
  TransformerClassifier& operator=(const TransformerClassifier&) = delete;

  const ModelConfig& config() const { return config_; }

  // Pre-sigmoid output for one sequence, computed over every given position
  // (PAD included, masked). |dropout_seed| only matters when |train|.
  nn::Var Logit(nn::Graph& g, std::span<const int32_t> ids,
                const nn::Mask& mask, bool train, uint64_t dropout_seed);

  // n x 1 pre-sigmoid outputs for unpadded sequences, with all rows packed
  // into one matrix so dense layers run as a single product. Matches Logit on
  // the same sequence up to rounding.
  nn::Var PackedLogits(nn::Graph& g,
                       std::span<const std::span<const int32_t>> sequences,
                       bool train, uint64_t dropout_seed);

  // Probabilities in (0, 1); trailing PAD trimmed, packed in chunks.
  std::vector<double> Forward(const Batch& batch);
  // Convenience over unpadded sequences.
  std::vector<double> PredictProba(
      std::span<const std::vector<int32_t>> sequences);

  // Mini-batch Adam on mean BCE. |labels| are 0/1. Deterministic in cfg.seed.
  TrainReport Train(std::span<const std::vector<int32_t>> sequences,
                    std::span<const int> labels, const TrainConfig& cfg);

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

  nlohmann::json CheckpointJson() const;
  void LoadCheckpointJson(const nlohmann::json& j);

  // {"model": ModelConfig, "vocabFingerprint": hex} sidecar.
  static nlohmann::json Sidecar(const ModelConfig& config,
                                uint64_t vocab_fingerprint);

 private:
  struct Layer {
    std::unique_ptr<nn::Parameter> wq, bq, wk, bk, wv, bv, wo, bo;
    std::unique_ptr<nn::Parameter> ln1_g, ln1_b;
    std::unique_ptr<nn::Parameter> ff1_w, ff1_b, ff2_w, ff2_b;
    std::unique_ptr<nn::Parameter> ln2_g, ln2_b;
  };
  struct Dense {
    std::unique_ptr<nn::Parameter> w, b;
  };

  std::unique_ptr<nn::Parameter> NewParam(const std::string& name,
                                          nn::Matrix init);

  ModelConfig config_;
  std::unique_ptr<nn::Parameter> embedding_;
  std::unique_ptr<nn::Parameter> conv_w_, conv_b_;
  std::vector<Layer> layers_;
  std::vector<Dense> head_;
  Dense out_;
  // Creation order; defines checkpoint order.
  std::vector<nn::Parameter*> params_;
  nn::Matrix positions_;
};

// FP iff probability >= threshold; threshold must be in [0, 1].
std::vector<int> PredictLabels(std::span<const double> probabilities,
                               double threshold = 0.5);

}  // namespace bcfp

#endif  // BCFP_TRANSFORMER_H_
