#ifndef BCFP_DATASET_H_
#define BCFP_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcfp/bytelog.h"
#include "bcfp/labeler.h"

namespace bcfp {

enum class Label : uint8_t { kNonFp = 0, kFp = 1 };

std::string_view LabelName(Label label);
Label LabelFromName(std::string_view name);

inline int LabelValue(Label label) {
  return label == Label::kFp ? 1 : 0;
}

struct LabeledExample {
  std::string domain;
  std::string script_url;
  uint64_t script_id = 0;
  std::string function_name;
  std::vector<int32_t> token_ids;
  Label label = Label::kNonFp;
  TechniqueSet techniques;
  // Index of the source record in the parsed log stream. Not persisted.
  size_t log_index = 0;

  friend bool operator==(const LabeledExample& a, const LabeledExample& b) {
    return a.domain == b.domain && a.script_url == b.script_url &&
           a.script_id == b.script_id && a.function_name == b.function_name &&
           a.token_ids == b.token_ids && a.label == b.label &&
           a.techniques == b.techniques;
  }
};

struct ScriptExample {
  std::string script_url;
  uint64_t script_id = 0;
  std::string domain;
  std::vector<int32_t> token_ids;
  Label label = Label::kNonFp;
  // Union over member functions.
  TechniqueSet techniques;

  friend bool operator==(const ScriptExample&,
                         const ScriptExample&) = default;
};

struct SplitSpec {
  double train_fraction = 0.9;
  uint64_t seed = 0;
  int neg_to_pos_ratio = 20;
  // Each training positive appears this many times (1 = no oversampling).
  int positive_duplication = 1;
};

struct JoinResult {
  std::vector<LabeledExample> examples;
  size_t dropped_anonymous = 0;
  size_t dropped_invalid_url = 0;
  size_t matched_verdicts = 0;
};

// Joins verdicts onto records by (script URL, script ID, function name).
// Records without a verdict are NonFP. Anonymous functions and non-web URLs
// are dropped first. Throws kDuplicateVerdictKey when two verdicts share a key.
JoinResult JoinLabels(std::span<const FunctionRecord> records,
                      std::span<const HeuristicVerdict> verdicts,
                      const Vocabulary& vocab,
                      size_t max_len = kFunctionMaxLen);

struct DedupeResult {
  std::vector<LabeledExample> examples;
  size_t removed = 0;
  // Distinct sequences that occurred with both labels.
  size_t conflicts = 0;
};

// Keeps the first occurrence of each token sequence; when a sequence carries
// both labels the FP occurrence wins.
DedupeResult Dedupe(std::span<const LabeledExample> examples);

struct ScriptDedupeResult {
  std::vector<ScriptExample> examples;
  size_t removed = 0;
};

// Concatenates member functions' tokens in log order per (URL, script ID),
// truncated to |max_len|, then drops duplicate concatenations. |examples| must
// reference |records| through log_index.
ScriptDedupeResult BuildScriptExamples(std::span<const LabeledExample> examples,
                                       std::span<const FunctionRecord> records,
                                       const Vocabulary& vocab,
                                       size_t max_len = kScriptMaxLen);

template <typename Example>
struct Split {
  std::vector<Example> train;
  std::vector<Example> test;
  bool negatives_capped = false;
};

// Stratified split first; then the training side keeps every positive and a
// seeded sample of ratio x |positives| negatives. The test side is untouched.
Split<LabeledExample> BalanceAndSplit(std::span<const LabeledExample> examples,
                                      const SplitSpec& spec);
Split<ScriptExample> BalanceAndSplit(std::span<const ScriptExample> examples,
                                     const SplitSpec& spec);

// Line-delimited JSON persistence.
std::string ToJsonl(std::span<const LabeledExample> examples);
std::string ToJsonl(std::span<const ScriptExample> examples);
std::vector<LabeledExample> LabeledExamplesFromJsonl(std::string_view text);
std::vector<ScriptExample> ScriptExamplesFromJsonl(std::string_view text);

}  // namespace bcfp

#endif  // BCFP_DATASET_H_
