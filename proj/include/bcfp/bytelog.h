#ifndef BCFP_BYTELOG_H_
#define BCFP_BYTELOG_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bcfp {

// One compiled function as emitted by the instrumented interpreter: identity
// triple, frame metadata and the opcode mnemonic sequence (operands dropped).
struct FunctionRecord {
  std::string script_url;
  uint64_t script_id = 0;
  std::string function_name;
  uint32_t parameter_count = 0;
  uint32_t register_count = 0;
  uint32_t frame_size = 0;
  std::vector<std::string> opcodes;

  bool IsAnonymous() const;

  friend bool operator==(const FunctionRecord&,
                         const FunctionRecord&) = default;
};

struct LogDiagnostic {
  size_t line_no = 0;  // 1-based line where the offending record starts.
  std::string reason;
};

struct ParseLogResult {
  std::vector<FunctionRecord> records;
  std::vector<LogDiagnostic> diagnostics;
};

// Parses zero or more blank-line separated records. Malformed records are
// skipped and reported in |diagnostics|; parsing always continues.
ParseLogResult ParseLog(std::string_view raw_text);

// Maximum physical width of an opcode line, trailing comma included.
inline constexpr size_t kOpcodeLineWidth = 60;

// Inverse of ParseLog for one record. Opcodes are wrapped greedily at
// kOpcodeLineWidth columns. Output ends with a newline.
std::string SerializeRecord(const FunctionRecord& record);

// Records separated by one blank line.
std::string SerializeLog(std::span<const FunctionRecord> records);

// Bijection between mnemonics and dense IDs. IDs 0 and 1 are reserved.
class Vocabulary {
 public:
  static constexpr int32_t kPadId = 0;
  static constexpr int32_t kUnkId = 1;
  static constexpr int32_t kFirstRealId = 2;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Returns the existing ID when |mnemonic| is already present.
  int32_t Add(std::string_view mnemonic);

  // kUnkId for mnemonics not in the vocabulary.
  int32_t IdOf(std::string_view mnemonic) const;
  bool Contains(std::string_view mnemonic) const;
  const std::string& MnemonicOf(int32_t id) const;

  // Total ID count including the two reserved IDs.
  int32_t size() const { return static_cast<int32_t>(mnemonics_.size()); }

  // One mnemonic per line; line i (0-based) holds ID i + 2.
  void Save(std::ostream& out) const;
  std::string ToText() const;
  static Vocabulary Load(std::istream& in);
  static Vocabulary FromText(std::string_view text);

  // FNV-1a of the serialized form; identifies the vocabulary a model saw.
  uint64_t Fingerprint() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.mnemonics_ == b.mnemonics_;
  }

 private:
  std::vector<std::string> mnemonics_;
  std::unordered_map<std::string, int32_t> ids_;
};

// IDs assigned in first-occurrence order across |records|.
Vocabulary BuildVocabulary(std::span<const FunctionRecord> records);

inline constexpr size_t kFunctionMaxLen = 512;
inline constexpr size_t kScriptMaxLen = 4096;

// Maps mnemonics to IDs (unknown -> kUnkId) and keeps the first |max_len|.
std::vector<int32_t> Tokenize(const FunctionRecord& record,
                              const Vocabulary& vocab,
                              size_t max_len = kFunctionMaxLen);

std::vector<int32_t> Tokenize(std::span<const std::string> opcodes,
                              const Vocabulary& vocab, size_t max_len);

}  // namespace bcfp

#endif  // BCFP_BYTELOG_H_
