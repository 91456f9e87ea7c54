#include "bcfp/transformer.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "bcfp/bytelog.h"
#include "bcfp/error.h"
#include "bcfp/nn/checkpoint.h"
#include "bcfp/random.h"
#include "bcfp/text_util.h"

namespace bcfp {

using nn::Graph;
using nn::Matrix;
using nn::Var;

namespace {

Matrix GlorotNormal(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = std * rng.Normal();
  return m;
}

Matrix Gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = std * rng.Normal();
  return m;
}

uint64_t SiteSeed(uint64_t base, uint64_t& site) {
  return Mix64(base + 0x9e3779b97f4a7c15ULL * ++site);
}

}  // namespace

std::string_view ModelVariantName(ModelVariant v) {
  return v == ModelVariant::kFunction ? "function" : "script";
}

ModelVariant ModelVariantFromName(std::string_view name) {
  if (name == "function")
    return ModelVariant::kFunction;
  if (name == "script")
    return ModelVariant::kScript;
  Fail(ErrorCode::kConfigError, "unknown model variant '" + std::string(name) +
                                    "'");
}

ModelConfig ModelConfig::FunctionDefaults(int vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::ScriptDefaults(int vocab_size) {
  ModelConfig c;
  c.variant = ModelVariant::kScript;
  c.vocab_size = vocab_size;
  c.embed_dim = 128;
  c.ffn_dim = 256;
  c.max_len = 4096;
  c.use_conv_frontend = true;
  c.dense_head_dims = {128, 64};
  return c;
}

void ModelConfig::Validate() const {
  auto bad = [](const std::string& what) {
    Fail(ErrorCode::kInvalidArgument, "model config: " + what);
  };
  if (vocab_size <= Vocabulary::kFirstRealId)
    bad("vocab_size must exceed the reserved ids");
  if (embed_dim <= 0 || embed_dim % 2 != 0)
    bad("embed_dim must be positive and even");
  if (num_heads <= 0 || embed_dim % num_heads != 0)
    bad("embed_dim must be divisible by num_heads");
  if (num_layers < 1 || ffn_dim < 1 || max_len < 1)
    bad("layers, ffn_dim and max_len must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    bad("dropout_rate must be in [0, 1)");
  for (int w : dense_head_dims) {
    if (w < 1)
      bad("dense head widths must be positive");
  }
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"variant", ModelVariantName(variant)},
          {"vocabSize", vocab_size},
          {"embedDim", embed_dim},
          {"numLayers", num_layers},
          {"numHeads", num_heads},
          {"ffnDim", ffn_dim},
          {"dropoutRate", dropout_rate},
          {"maxLen", max_len},
          {"useConvFrontend", use_conv_frontend},
          {"denseHeadDims", dense_head_dims}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = ModelVariantFromName(j.at("variant").get<std::string>());
    c.vocab_size = j.at("vocabSize").get<int>();
    c.embed_dim = j.at("embedDim").get<int>();
    c.num_layers = j.at("numLayers").get<int>();
    c.num_heads = j.at("numHeads").get<int>();
    c.ffn_dim = j.at("ffnDim").get<int>();
    c.dropout_rate = j.at("dropoutRate").get<double>();
    c.max_len = j.at("maxLen").get<int>();
    c.use_conv_frontend = j.at("useConvFrontend").get<bool>();
    c.dense_head_dims = j.at("denseHeadDims").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchemaError, std::string("model config: ") + e.what());
  }
  c.Validate();
  return c;
}

TrainConfig TrainConfig::FunctionDefaults() {
  return TrainConfig{};
}

TrainConfig TrainConfig::ScriptDefaults() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 16;
  return c;
}

Batch MakeBatch(std::span<const std::vector<int32_t>> sequences) {
  size_t longest = 0;
  for (const auto& s : sequences)
    longest = std::max(longest, s.size());
  Batch b;
  for (const auto& s : sequences) {
    std::vector<int32_t> ids = s;
    ids.resize(longest, Vocabulary::kPadId);
    nn::Mask mask(longest, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<ptrdiff_t>(s.size()),
              1);
    b.ids.push_back(std::move(ids));
    b.masks.push_back(std::move(mask));
  }
  return b;
}

std::unique_ptr<nn::Parameter> TransformerClassifier::NewParam(
    const std::string& name, Matrix init) {
  auto p = std::make_unique<nn::Parameter>(name, std::move(init));
  params_.push_back(p.get());
  return p;
}

TransformerClassifier::TransformerClassifier(const ModelConfig& config,
                                             uint64_t init_seed)
    : config_(config) {
  config_.Validate();
  Rng rng(init_seed);
  const Eigen::Index d = config_.embed_dim;
  embedding_ = NewParam("embedding", Gaussian(rng, config_.vocab_size, d, 1.0));
  if (config_.use_conv_frontend) {
    conv_w_ = NewParam("conv.w", GlorotNormal(rng, 2 * d, d));
    conv_b_ = NewParam("conv.b", Matrix::Zero(1, d));
  }
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = NewParam(p + "attn.wq", GlorotNormal(rng, d, d));
    layer.bq = NewParam(p + "attn.bq", Matrix::Zero(1, d));
    layer.wk = NewParam(p + "attn.wk", GlorotNormal(rng, d, d));
    layer.bk = NewParam(p + "attn.bk", Matrix::Zero(1, d));
    layer.wv = NewParam(p + "attn.wv", GlorotNormal(rng, d, d));
    layer.bv = NewParam(p + "attn.bv", Matrix::Zero(1, d));
    layer.wo = NewParam(p + "attn.wo", GlorotNormal(rng, d, d));
    layer.bo = NewParam(p + "attn.bo", Matrix::Zero(1, d));
    layer.ln1_g = NewParam(p + "ln1.gamma", Matrix::Ones(1, d));
    layer.ln1_b = NewParam(p + "ln1.beta", Matrix::Zero(1, d));
    layer.ff1_w = NewParam(p + "ffn.w1", GlorotNormal(rng, d, config_.ffn_dim));
    layer.ff1_b = NewParam(p + "ffn.b1", Matrix::Zero(1, config_.ffn_dim));
    layer.ff2_w = NewParam(p + "ffn.w2", GlorotNormal(rng, config_.ffn_dim, d));
    layer.ff2_b = NewParam(p + "ffn.b2", Matrix::Zero(1, d));
    layer.ln2_g = NewParam(p + "ln2.gamma", Matrix::Ones(1, d));
    layer.ln2_b = NewParam(p + "ln2.beta", Matrix::Zero(1, d));
    layers_.push_back(std::move(layer));
  }
  Eigen::Index width = d;
  for (size_t i = 0; i < config_.dense_head_dims.size(); ++i) {
    const Eigen::Index out = config_.dense_head_dims[i];
    const std::string p = "head" + std::to_string(i) + ".";
    head_.push_back({NewParam(p + "w", GlorotNormal(rng, width, out)),
                     NewParam(p + "b", Matrix::Zero(1, out))});
    width = out;
  }
  out_ = {NewParam("out.w", GlorotNormal(rng, width, 1)),
          NewParam("out.b", Matrix::Zero(1, 1))};
  positions_ = nn::SinusoidalPositions(config_.max_len, d);
}

Var TransformerClassifier::Logit(Graph& g, std::span<const int32_t> ids,
                                 const nn::Mask& mask_in, bool train,
                                 uint64_t dropout_seed) {
  if (ids.empty())
    Fail(ErrorCode::kEmptySequence, "cannot classify an empty sequence");
  if (mask_in.size() != ids.size())
    Fail(ErrorCode::kShapeMismatch, "mask length differs from ids");
  if (ids.size() > static_cast<size_t>(config_.max_len))
    Fail(ErrorCode::kShapeMismatch, "sequence longer than max_len");
  const auto len = static_cast<Eigen::Index>(ids.size());
  const double rate = config_.dropout_rate;
  uint64_t site = 0;
  auto dropout = [&](Var x) {
    return nn::Dropout(g, x, rate, SiteSeed(dropout_seed, site), train);
  };

  Var x = nn::EmbeddingLookup(g, g.Param(*embedding_), ids);
  x = nn::Add(g, x, g.Constant(positions_.topRows(len)));
  x = nn::MaskRows(g, x, mask_in);
  nn::Mask mask = mask_in;
  if (config_.use_conv_frontend) {
    x = nn::Conv1dK2S2(g, x, g.Param(*conv_w_), g.Param(*conv_b_));
    mask = nn::DownsampleMask(mask);
  }
  for (Layer& layer : layers_) {
    const nn::AttentionVars p{g.Param(*layer.wq), g.Param(*layer.bq),
                              g.Param(*layer.wk), g.Param(*layer.bk),
                              g.Param(*layer.wv), g.Param(*layer.bv),
                              g.Param(*layer.wo), g.Param(*layer.bo)};
    Var attn =
        nn::MultiHeadAttention(g, x, p, config_.num_heads, mask).output;
    x = nn::LayerNorm(g, nn::Add(g, x, dropout(attn)), g.Param(*layer.ln1_g),
                      g.Param(*layer.ln1_b));
    Var f = nn::Relu(g, nn::AddBias(g, nn::MatMul(g, x, g.Param(*layer.ff1_w)),
                                    g.Param(*layer.ff1_b)));
    f = nn::AddBias(g, nn::MatMul(g, f, g.Param(*layer.ff2_w)),
                    g.Param(*layer.ff2_b));
    x = nn::LayerNorm(g, nn::Add(g, x, dropout(f)), g.Param(*layer.ln2_g),
                      g.Param(*layer.ln2_b));
  }
  Var h = nn::GlobalAveragePool(g, x, mask);
  for (Dense& dense : head_) {
    h = nn::Relu(g, nn::AddBias(g, nn::MatMul(g, h, g.Param(*dense.w)),
                                g.Param(*dense.b)));
    h = dropout(h);
  }
  return nn::AddBias(g, nn::MatMul(g, h, g.Param(*out_.w)), g.Param(*out_.b));
}

Var TransformerClassifier::PackedLogits(
    Graph& g, std::span<const std::span<const int32_t>> sequences, bool train,
    uint64_t dropout_seed) {
  if (sequences.empty())
    Fail(ErrorCode::kEmptyDataset, "no sequences to pack");
  const Eigen::Index d = config_.embed_dim;
  std::vector<int32_t> ids;
  std::vector<Eigen::Index> lengths;
  for (const auto& s : sequences) {
    if (s.empty())
      Fail(ErrorCode::kEmptySequence, "cannot classify an empty sequence");
    if (s.size() > static_cast<size_t>(config_.max_len))
      Fail(ErrorCode::kShapeMismatch, "sequence longer than max_len");
    ids.insert(ids.end(), s.begin(), s.end());
    lengths.push_back(static_cast<Eigen::Index>(s.size()));
  }
  Matrix pos(static_cast<Eigen::Index>(ids.size()), d);
  Eigen::Index at = 0;
  for (Eigen::Index n : lengths) {
    pos.middleRows(at, n) = positions_.topRows(n);
    at += n;
  }
  const double rate = config_.dropout_rate;
  uint64_t site = 0;
  auto dropout = [&](Var x) {
    return nn::Dropout(g, x, rate, SiteSeed(dropout_seed, site), train);
  };

  Var x = nn::EmbeddingLookup(g, g.Param(*embedding_), ids);
  x = nn::Add(g, x, g.Constant(std::move(pos)));
  if (config_.use_conv_frontend) {
    const Var w = g.Param(*conv_w_);
    const Var b = g.Param(*conv_b_);
    std::vector<Var> parts;
    at = 0;
    for (Eigen::Index& n : lengths) {
      parts.push_back(nn::Conv1dK2S2(g, nn::SliceRows(g, x, at, n), w, b));
      at += n;
      n = (n + 1) / 2;
    }
    x = parts.size() == 1 ? parts[0] : nn::ConcatRows(g, parts);
  }
  for (Layer& layer : layers_) {
    const Var q = nn::AddBias(g, nn::MatMul(g, x, g.Param(*layer.wq)),
                              g.Param(*layer.bq));
    const Var k = nn::AddBias(g, nn::MatMul(g, x, g.Param(*layer.wk)),
                              g.Param(*layer.bk));
    const Var v = nn::AddBias(g, nn::MatMul(g, x, g.Param(*layer.wv)),
                              g.Param(*layer.bv));
    const Var ctx = nn::SegmentAttention(g, q, k, v, lengths, config_.num_heads);
    const Var attn = nn::AddBias(g, nn::MatMul(g, ctx, g.Param(*layer.wo)),
                                 g.Param(*layer.bo));
    x = nn::LayerNorm(g, nn::Add(g, x, dropout(attn)), g.Param(*layer.ln1_g),
                      g.Param(*layer.ln1_b));
    Var f = nn::Relu(g, nn::AddBias(g, nn::MatMul(g, x, g.Param(*layer.ff1_w)),
                                    g.Param(*layer.ff1_b)));
    f = nn::AddBias(g, nn::MatMul(g, f, g.Param(*layer.ff2_w)),
                    g.Param(*layer.ff2_b));
    x = nn::LayerNorm(g, nn::Add(g, x, dropout(f)), g.Param(*layer.ln2_g),
                      g.Param(*layer.ln2_b));
  }
  Var h = nn::SegmentMeanPool(g, x, lengths);
  for (Dense& dense : head_) {
    h = nn::Relu(g, nn::AddBias(g, nn::MatMul(g, h, g.Param(*dense.w)),
                                g.Param(*dense.b)));
    h = dropout(h);
  }
  return nn::AddBias(g, nn::MatMul(g, h, g.Param(*out_.w)), g.Param(*out_.b));
}

namespace {

constexpr size_t kPackRows = 2048;

// Consecutive [begin, end) ranges of |order| holding at most kPackRows tokens
// each (a single longer sequence gets its own range).
std::vector<std::pair<size_t, size_t>> PackRanges(
    std::span<const size_t> lengths) {
  std::vector<std::pair<size_t, size_t>> out;
  size_t begin = 0;
  size_t rows = 0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    if (i > begin && rows + lengths[i] > kPackRows) {
      out.emplace_back(begin, i);
      begin = i;
      rows = 0;
    }
    rows += lengths[i];
  }
  if (begin < lengths.size())
    out.emplace_back(begin, lengths.size());
  return out;
}

}  // namespace

std::vector<double> TransformerClassifier::Forward(const Batch& batch) {
  if (batch.ids.size() != batch.masks.size())
    Fail(ErrorCode::kShapeMismatch, "batch ids and masks differ in count");
  const size_t n = batch.ids.size();
  std::vector<double> probs(n, 0.0);
  std::vector<std::span<const int32_t>> trimmed(n);
  std::vector<size_t> lengths(n);
  // Examples whose mask has holes before the last real token.
  std::vector<size_t> holey;
  for (size_t i = 0; i < n; ++i) {
    const auto& mask = batch.masks[i];
    if (mask.size() != batch.ids[i].size())
      Fail(ErrorCode::kShapeMismatch,
           "example " + std::to_string(i) + ": mask length differs from ids");
    size_t keep = mask.size();
    while (keep > 0 && !mask[keep - 1])
      --keep;
    if (keep == 0)
      Fail(ErrorCode::kEmptySequence,
           "example " + std::to_string(i) + ": no unmasked tokens");
    if (std::find(mask.begin(), mask.begin() + static_cast<ptrdiff_t>(keep),
                  0) != mask.begin() + static_cast<ptrdiff_t>(keep))
      holey.push_back(i);
    trimmed[i] = std::span(batch.ids[i]).first(keep);
    lengths[i] = keep;
  }

  const auto ranges = PackRanges(lengths);
  std::vector<std::string> errors(ranges.size());
  std::vector<ErrorCode> codes(ranges.size(), ErrorCode::kInvalidArgument);
  const auto nr = static_cast<ptrdiff_t>(ranges.size());
#pragma omp parallel for schedule(dynamic)
  for (ptrdiff_t r = 0; r < nr; ++r) {
    const auto [begin, end] = ranges[static_cast<size_t>(r)];
    try {
      Graph g(/*grad_enabled=*/false);
      const Matrix& z = g.value(PackedLogits(
          g, std::span(trimmed).subspan(begin, end - begin), false, 0));
      for (size_t i = begin; i < end; ++i)
        probs[i] = 1.0 / (1.0 + std::exp(-z(static_cast<Eigen::Index>(i - begin), 0)));
    } catch (const Error& e) {
      codes[static_cast<size_t>(r)] = e.code();
      errors[static_cast<size_t>(r)] = e.what();
    }
  }
  for (size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r].empty())
      throw Error(codes[r], "examples " + std::to_string(ranges[r].first) +
                                "+: " + errors[r]);
  }
  for (size_t i : holey) {
    Graph g(/*grad_enabled=*/false);
    const nn::Mask mask(batch.masks[i].begin(),
                        batch.masks[i].begin() +
                            static_cast<ptrdiff_t>(lengths[i]));
    const double z = g.value(Logit(g, trimmed[i], mask, false, 0))(0, 0);
    probs[i] = 1.0 / (1.0 + std::exp(-z));
  }
  return probs;
}

std::vector<double> TransformerClassifier::PredictProba(
    std::span<const std::vector<int32_t>> sequences) {
  Batch b;
  for (const auto& s : sequences) {
    b.ids.push_back(s);
    b.masks.emplace_back(s.size(), 1);
  }
  return Forward(b);
}

TrainReport TransformerClassifier::Train(
    std::span<const std::vector<int32_t>> sequences,
    std::span<const int> labels, const TrainConfig& cfg) {
  if (sequences.empty())
    Fail(ErrorCode::kEmptyDataset, "no training examples");
  if (sequences.size() != labels.size())
    Fail(ErrorCode::kLengthMismatch, "sequences and labels differ in count");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    Fail(ErrorCode::kInvalidArgument, "epochs and batch_size must be >= 1");
  for (int y : labels) {
    if (y != 0 && y != 1)
      Fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
  for (nn::Parameter* p : params_)
    p->ZeroGrad();

  TrainReport report;
  std::vector<size_t> order(sequences.size());
  for (size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  const uint64_t dropout_base = DeriveSeed(cfg.seed, "dropout");
  uint64_t chunk_counter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(DeriveSeed(cfg.seed, "epoch-" + std::to_string(epoch)));
    order_rng.Shuffle(order);
    double total = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      std::vector<size_t> lengths;
      for (size_t k = start; k < end; ++k)
        lengths.push_back(sequences[order[k]].size());
      for (const auto& [b, e] : PackRanges(lengths)) {
        std::vector<std::span<const int32_t>> chunk;
        std::vector<double> y;
        for (size_t k = start + b; k < start + e; ++k) {
          chunk.emplace_back(sequences[order[k]]);
          y.push_back(static_cast<double>(labels[order[k]]));
        }
        Graph g;
        const Var z =
            PackedLogits(g, chunk, true, Mix64(dropout_base ^ ++chunk_counter));
        const Var loss = nn::BceWithLogits(g, z, y);
        const double count = static_cast<double>(e - b);
        total += g.value(loss)(0, 0) * count;
        g.Backward(loss, count * inv_batch);
      }
      nn::AdamStep(params_, cfg.adam);
    }
    report.epoch_loss.push_back(total / static_cast<double>(order.size()));
    if (cfg.stop_loss > 0.0 && report.epoch_loss.back() < cfg.stop_loss)
      break;
  }
  return report;
}

std::vector<nn::Parameter*> TransformerClassifier::parameters() {
  return params_;
}

std::vector<const nn::Parameter*> TransformerClassifier::parameters() const {
  return {params_.begin(), params_.end()};
}

nlohmann::json TransformerClassifier::CheckpointJson() const {
  const auto ps = parameters();
  return nn::CheckpointToJson(ps);
}

void TransformerClassifier::LoadCheckpointJson(const nlohmann::json& j) {
  nn::CheckpointFromJson(j, params_);
}

nlohmann::json TransformerClassifier::Sidecar(const ModelConfig& config,
                                              uint64_t vocab_fingerprint) {
  return {{"model", config.ToJson()},
          {"vocabFingerprint", ToHex64(vocab_fingerprint)}};
}

std::vector<int> PredictLabels(std::span<const double> probabilities,
                               double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    Fail(ErrorCode::kInvalidArgument, "threshold must be in [0, 1]");
  std::vector<int> out;
  out.reserve(probabilities.size());
  for (double p : probabilities)
    out.push_back(p >= threshold ? 1 : 0);
  return out;
}

}  // namespace bcfp
