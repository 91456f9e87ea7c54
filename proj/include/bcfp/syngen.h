#ifndef BCFP_SYNGEN_H_
#define BCFP_SYNGEN_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bcfp/bytelog.h"
#include "bcfp/labeler.h"
#include "bcfp/traces.h"

namespace bcfp {

// Log-normal over positive values, clamped to [min, max] after sampling.
struct LengthDistribution {
  double median = 30;
  double sigma = 0.8;
  uint32_t min = 3;
  uint32_t max = 1000;
};

struct CorpusSpec {
  size_t n_scripts = 100;
  // When nonzero, scripts are generated until exactly this many functions
  // exist and |n_scripts| is ignored.
  size_t n_functions = 0;
  // Functions per script: round(LogNormal(log(median), sigma)), at least 2.
  double functions_per_script_median = 8;
  double functions_per_script_sigma = 0.6;
  double fp_fraction = 0.05;
  LengthDistribution non_fp_length{30, 0.8, 3, 1000};
  LengthDistribution fp_length{300, 0.5, 100, 1000};
  // Opcode run planted in every FP function inside the first kFunctionMaxLen
  // positions.
  std::vector<std::string> motif = DefaultMotif();
  // Share of non-FP functions that get a near-miss trace.
  double near_miss_fraction = 0.2;
  // Zipf exponent of the background opcode distribution.
  double zipf_exponent = 1.1;
  uint64_t seed = 0;

  // Throws kInvalidSpec.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys keep their defaults. Throws kConfigError.
  static CorpusSpec FromJson(const nlohmann::json& j);

  static std::vector<std::string> DefaultMotif();
  // Maps each motif opcode to a distinct reserved opcode not used elsewhere.
  static std::vector<std::string> RenamedMotif();
};

// Mnemonics that never occur in background code.
const std::vector<std::string>& ReservedMotifOpcodes();

enum class NearMiss {
  kNone,
  kShortFillText,      // 9-code-point text
  kCanvasStateCall,    // qualifying canvas plus save()
  kFewMeasureText,     // 19 calls, 25 fonts
  kTwentyFonts,        // 25 calls, exactly 20 fonts
  kNoChannelData,      // audio graph without getChannelData
  kChannelDataFirst,   // getChannelData before any audio setup
  kNoLocalDescription, // createOffer without setLocalDescription
};
std::string_view NearMissName(NearMiss n);

struct ManifestEntry {
  FunctionKey key;
  bool is_fp = false;
  TechniqueSet techniques;
  NearMiss near_miss = NearMiss::kNone;
  size_t opcode_count = 0;
  // Offset of the planted motif, or -1.
  int64_t motif_offset = -1;
};

struct GeneratedCorpus {
  std::vector<FunctionRecord> records;
  std::vector<TraceEvent> events;
  std::vector<ManifestEntry> manifest;

  std::string LogText() const;
  std::string TraceJson() const;
  std::string ManifestJsonl() const;
};

// Deterministic for a given spec. Throws kInvalidSpec.
GeneratedCorpus Generate(const CorpusSpec& spec);

std::vector<ManifestEntry> ManifestFromJsonl(std::string_view text);

}  // namespace bcfp

#endif  // BCFP_SYNGEN_H_
