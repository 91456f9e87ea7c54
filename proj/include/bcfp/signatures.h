#ifndef BCFP_SIGNATURES_H_
#define BCFP_SIGNATURES_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bcfp/bytelog.h"
#include "bcfp/dataset.h"
#include "bcfp/labeler.h"

namespace bcfp {

// FNV-1a 64 over the comma-joined mnemonics. Throws kEmptySequence.
uint64_t HashSequence(std::span<const std::string> opcodes);

struct SignatureEntry {
  uint64_t hash = 0;
  TechniqueSet techniques;
  std::string script_url;  // First source seen.
};

class SignatureSet {
 public:
  // Merges techniques when |hash| is already present.
  void Insert(uint64_t hash, TechniqueSet techniques = {},
              std::string_view script_url = {});
  bool Contains(uint64_t hash) const { return index_.contains(hash); }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Sorted by hash.
  std::vector<SignatureEntry> Entries() const;

  // "<16 hex digits>[ #<tech|tech>,<url>]" per line, sorted by hash.
  std::string ToText() const;
  // Ignores blank lines and '#' comments. Throws kSchemaError on a bad line.
  static SignatureSet FromText(std::string_view text);

 private:
  std::vector<SignatureEntry> entries_;
  std::unordered_map<uint64_t, size_t> index_;
};

struct SignatureSource {
  std::span<const std::string> opcodes;
  TechniqueSet techniques;
  std::string_view script_url;
};

struct SignatureBuildResult {
  SignatureSet set;
  // Distinct sequences whose hash equals an earlier, different sequence.
  size_t collisions = 0;
};

// One entry per distinct sequence.
SignatureBuildResult BuildSignatureSet(std::span<const SignatureSource> sources);

// FP examples detokenized through |vocab|. Examples containing <unk> or cut at
// the tokenizer cap do not reproduce the original bytecode; prefer the
// record-based overload for those.
SignatureBuildResult BuildSignatureSet(std::span<const LabeledExample> examples,
                                       const Vocabulary& vocab);

enum class MatchDecision { kAllow, kBlock };

MatchDecision Match(const FunctionRecord& record, const SignatureSet& sigs);
MatchDecision Match(std::span<const std::string> opcodes,
                    const SignatureSet& sigs);

// Parallel over records.
std::vector<MatchDecision> MatchAll(std::span<const FunctionRecord> records,
                                    const SignatureSet& sigs);
// Serial reference for MatchAll.
std::vector<MatchDecision> MatchAllSerial(
    std::span<const FunctionRecord> records, const SignatureSet& sigs);

struct LatencyReport {
  double mean_ns = 0;
  double p5_ns = 0;
  double p25_ns = 0;
  double p50_ns = 0;
  double p75_ns = 0;
  double p95_ns = 0;
  double functions_per_second = 0;
  // Per-repetition mean latency.
  std::vector<double> repetition_mean_ns;
  size_t functions = 0;
  size_t blocked = 0;
};

// Times hash + lookup per function, |repetitions| passes over |records|.
LatencyReport BenchMatcher(std::span<const FunctionRecord> records,
                           const SignatureSet& sigs, int repetitions);

}  // namespace bcfp

#endif  // BCFP_SIGNATURES_H_
