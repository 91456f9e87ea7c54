#ifndef BCFP_PIPELINE_H_
#define BCFP_PIPELINE_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcfp/bytelog.h"
#include "bcfp/dataset.h"
#include "bcfp/embed.h"
#include "bcfp/forest.h"
#include "bcfp/labeler.h"
#include "bcfp/metrics.h"
#include "bcfp/syngen.h"
#include "bcfp/traces.h"
#include "bcfp/transformer.h"

namespace bcfp {

// Fixed artifact names under the output directory.
namespace artifact {
inline constexpr char kManifest[] = "manifest.jsonl";
inline constexpr char kCorpusLog[] = "corpus.log";
inline constexpr char kCorpusTraces[] = "traces.json";
inline constexpr char kRecords[] = "records.log";
inline constexpr char kVocab[] = "vocab.txt";
inline constexpr char kEvents[] = "events.json";
inline constexpr char kVerdicts[] = "verdicts.jsonl";
inline constexpr char kFunctionTrain[] = "function_train.jsonl";
inline constexpr char kFunctionTest[] = "function_test.jsonl";
inline constexpr char kScriptTrain[] = "script_train.jsonl";
inline constexpr char kScriptTest[] = "script_test.jsonl";
inline constexpr char kEmbeddings[] = "embeddings.txt";
inline constexpr char kForest[] = "forest.json";
inline constexpr char kEvalReport[] = "eval.json";
inline constexpr char kEvalTable[] = "eval_table.txt";
inline constexpr char kSignatures[] = "signatures.txt";
inline constexpr char kMatches[] = "match.jsonl";
inline constexpr char kBench[] = "bench.json";
}  // namespace artifact

struct PipelineConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";
  // Empty means <output_dir>/logs and <output_dir>/traces.
  std::string logs_dir;
  std::string traces_dir;
  // Empty means <output_dir>/signatures.txt.
  std::string signature_file;
  CorpusSpec corpus;
  SplitSpec split;
  EmbedConfig embed = EmbedConfig::SkipGramDefaults();
  ForestConfig forest;
  // vocab_size is filled in from the vocabulary at training time.
  ModelConfig function_model = ModelConfig::FunctionDefaults(0);
  ModelConfig script_model = ModelConfig::ScriptDefaults(0);
  TrainConfig function_train = TrainConfig::FunctionDefaults();
  TrainConfig script_train = TrainConfig::ScriptDefaults();
  double eval_threshold = 0.5;
  int bench_repetitions = 20;

  std::string LogsDir() const;
  std::string TracesDir() const;
  std::string SignatureFile() const;
  std::string OutPath(std::string_view name) const;

  // Every module seed is derived from |seed| by labeled hashing.
  void DeriveSeeds();

  nlohmann::json ToJson() const;
  // Missing keys keep defaults; all module configs are validated. Throws
  // kConfigError.
  static PipelineConfig FromJson(const nlohmann::json& j);
};

// Overwrites the value at a dotted path ("functionTrain.epochs") with |value|
// parsed as JSON, or as a string when it is not valid JSON. Throws
// kConfigError for unknown paths.
void ApplyOverride(nlohmann::json& config, std::string_view assignment);

// Filter, group and label in one step.
std::vector<HeuristicVerdict> LabelEvents(std::span<const TraceEvent> events);

struct Datasets {
  Split<LabeledExample> functions;
  Split<ScriptExample> scripts;
  size_t joined = 0;
  size_t deduped_functions = 0;
  size_t deduped_scripts = 0;
  size_t dropped = 0;
};

Datasets BuildDatasets(std::span<const FunctionRecord> records,
                       std::span<const HeuristicVerdict> verdicts,
                       const Vocabulary& vocab, const SplitSpec& split);

template <typename Example>
std::vector<std::vector<int32_t>> TokenSequences(
    std::span<const Example> examples) {
  std::vector<std::vector<int32_t>> out;
  out.reserve(examples.size());
  for (const Example& e : examples)
    out.push_back(e.token_ids);
  return out;
}

template <typename Example>
std::vector<int> Labels(std::span<const Example> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const Example& e : examples)
    out.push_back(LabelValue(e.label));
  return out;
}

// Rows are mean token vectors.
nn::Matrix AveragedFeatures(std::span<const LabeledExample> examples,
                            const EmbeddingMatrix& emb);

std::unique_ptr<TransformerClassifier> TrainTransformer(
    std::span<const std::vector<int32_t>> sequences,
    std::span<const int> labels, ModelConfig model, int vocab_size,
    const TrainConfig& train, TrainReport* report = nullptr);

// One subcommand run: reads inputs from the configured directories, writes
// artifacts and run_<name>.json into the output directory, and returns the
// summary. |options| carries subcommand-specific flags.
struct StageOptions {
  std::string level = "function";  // train-tx
  std::vector<std::string> models;  // eval; empty = all present
  std::string scores_file;          // eval
  std::string labels_file;          // eval
  std::string input_log;            // match, bench; empty = records.log
};

nlohmann::json RunStage(std::string_view name, const PipelineConfig& cfg,
                        const StageOptions& options);

// Subcommand names in pipeline order.
std::span<const std::string_view> StageNames();

}  // namespace bcfp

#endif  // BCFP_PIPELINE_H_
