#include "bcfp/bytelog.h"

#include <istream>
#include <ostream>
#include <sstream>

#include "bcfp/error.h"
#include "bcfp/hash.h"
#include "bcfp/text_util.h"

namespace bcfp {

namespace {

constexpr std::string_view kUrlHeader = "Script URL:";
constexpr std::string_view kIdHeader = "Script ID:";
constexpr std::string_view kNameHeader = "Function name:";
constexpr std::string_view kBytecodeHeader = "Bytecode:";
constexpr std::string_view kParamHeader = "Parameter count";
constexpr std::string_view kRegisterHeader = "Register count";
constexpr std::string_view kFrameHeader = "Frame size";

bool IsBlank(std::string_view line) {
  return TrimWhitespace(line).empty();
}

bool StartsRecord(std::string_view line) {
  return line.starts_with(kUrlHeader);
}

// Returns the trimmed remainder after |header|, or nullopt on mismatch.
std::optional<std::string_view> HeaderValue(std::string_view line,
                                            std::string_view header) {
  if (!line.starts_with(header))
    return std::nullopt;
  return TrimWhitespace(line.substr(header.size()));
}

struct Block {
  size_t first_line = 0;  // 1-based.
  std::vector<std::string_view> lines;
};

// Blocks end at a blank line or where a new "Script URL:" line begins.
std::vector<Block> SplitBlocks(std::string_view raw_text) {
  std::vector<Block> blocks;
  const std::vector<std::string_view> lines = SplitLines(raw_text);
  Block current;
  auto flush = [&] {
    if (!current.lines.empty())
      blocks.push_back(std::move(current));
    current = Block();
  };
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (IsBlank(line)) {
      flush();
      continue;
    }
    if (StartsRecord(line))
      flush();
    if (current.lines.empty())
      current.first_line = i + 1;
    current.lines.push_back(line);
  }
  flush();
  return blocks;
}

std::optional<std::string> ParseBlock(const Block& block,
                                      FunctionRecord& out) {
  const std::vector<std::string_view>& l = block.lines;
  constexpr size_t kHeaderLines = 7;
  if (l.size() < kHeaderLines)
    return "truncated header (" + std::to_string(l.size()) + " lines)";
  auto url = HeaderValue(l[0], kUrlHeader);
  if (!url)
    return "missing 'Script URL:' header";
  auto id = HeaderValue(l[1], kIdHeader);
  if (!id)
    return "missing 'Script ID:' header";
  auto name = HeaderValue(l[2], kNameHeader);
  if (!name)
    return "missing 'Function name:' header";
  if (!HeaderValue(l[3], kBytecodeHeader))
    return "missing 'Bytecode:' header";
  auto params = HeaderValue(l[4], kParamHeader);
  if (!params)
    return "missing 'Parameter count' header";
  auto registers = HeaderValue(l[5], kRegisterHeader);
  if (!registers)
    return "missing 'Register count' header";
  auto frame = HeaderValue(l[6], kFrameHeader);
  if (!frame)
    return "missing 'Frame size' header";

  auto id_value = ParseUint64(*id);
  if (!id_value)
    return "non-numeric script id '" + std::string(*id) + "'";
  auto params_value = ParseUint64(*params);
  auto registers_value = ParseUint64(*registers);
  auto frame_value = ParseUint64(*frame);
  if (!params_value || !registers_value || !frame_value ||
      *params_value > UINT32_MAX || *registers_value > UINT32_MAX ||
      *frame_value > UINT32_MAX) {
    return "non-numeric frame metadata";
  }

  out = FunctionRecord();
  out.script_url = std::string(*url);
  out.script_id = *id_value;
  out.function_name = std::string(*name);
  out.parameter_count = static_cast<uint32_t>(*params_value);
  out.register_count = static_cast<uint32_t>(*registers_value);
  out.frame_size = static_cast<uint32_t>(*frame_value);

  for (size_t i = kHeaderLines; i < l.size(); ++i) {
    std::string_view rest = l[i];
    while (!rest.empty()) {
      const size_t comma = rest.find(',');
      std::string_view token = TrimWhitespace(rest.substr(0, comma));
      rest = comma == std::string_view::npos ? std::string_view()
                                             : rest.substr(comma + 1);
      if (token.empty())
        continue;
      if (token.find_first_of(" \t") != std::string_view::npos)
        return "opcode contains whitespace: '" + std::string(token) + "'";
      out.opcodes.emplace_back(token);
    }
  }
  if (out.opcodes.empty())
    return "empty opcode list";
  return std::nullopt;
}

}  // namespace

bool FunctionRecord::IsAnonymous() const {
  return TrimWhitespace(function_name).empty();
}

ParseLogResult ParseLog(std::string_view raw_text) {
  ParseLogResult result;
  for (const Block& block : SplitBlocks(raw_text)) {
    FunctionRecord record;
    if (auto error = ParseBlock(block, record)) {
      result.diagnostics.push_back({block.first_line, std::move(*error)});
      continue;
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

std::string SerializeRecord(const FunctionRecord& record) {
  std::string out;
  out += "Script URL: " + record.script_url + "\n";
  out += "Script ID: " + std::to_string(record.script_id) + "\n";
  out += "Function name: " + record.function_name + "\n";
  out += "Bytecode: \n";
  out += "Parameter count " + std::to_string(record.parameter_count) + "\n";
  out += "Register count " + std::to_string(record.register_count) + "\n";
  out += "Frame size " + std::to_string(record.frame_size) + "\n";
  std::string line;
  for (size_t i = 0; i < record.opcodes.size(); ++i) {
    std::string piece = record.opcodes[i];
    if (i + 1 < record.opcodes.size())
      piece += ',';
    if (!line.empty() && line.size() + piece.size() > kOpcodeLineWidth) {
      out += line + "\n";
      line.clear();
    }
    line += piece;
  }
  out += line + "\n";
  return out;
}

std::string SerializeLog(std::span<const FunctionRecord> records) {
  std::string out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (i > 0)
      out += "\n";
    out += SerializeRecord(records[i]);
  }
  return out;
}

Vocabulary::Vocabulary() {
  mnemonics_ = {std::string(kPadToken), std::string(kUnkToken)};
}

int32_t Vocabulary::Add(std::string_view mnemonic) {
  auto it = ids_.find(std::string(mnemonic));
  if (it != ids_.end())
    return it->second;
  if (mnemonic.empty() ||
      mnemonic.find_first_of(", \t\r\n") != std::string_view::npos) {
    Fail(ErrorCode::kInvalidArgument,
         "invalid mnemonic '" + std::string(mnemonic) + "'");
  }
  const int32_t id = size();
  mnemonics_.emplace_back(mnemonic);
  ids_.emplace(std::string(mnemonic), id);
  return id;
}

int32_t Vocabulary::IdOf(std::string_view mnemonic) const {
  auto it = ids_.find(std::string(mnemonic));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::Contains(std::string_view mnemonic) const {
  return ids_.contains(std::string(mnemonic));
}

const std::string& Vocabulary::MnemonicOf(int32_t id) const {
  if (id < 0 || id >= size())
    Fail(ErrorCode::kUnknownTokenId, "id " + std::to_string(id));
  return mnemonics_[static_cast<size_t>(id)];
}

void Vocabulary::Save(std::ostream& out) const {
  out << ToText();
}

std::string Vocabulary::ToText() const {
  std::string text;
  for (size_t i = kFirstRealId; i < mnemonics_.size(); ++i)
    text += mnemonics_[i] + "\n";
  return text;
}

Vocabulary Vocabulary::Load(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return FromText(ss.str());
}

Vocabulary Vocabulary::FromText(std::string_view text) {
  Vocabulary vocab;
  for (std::string_view line : SplitLines(text)) {
    std::string_view token = TrimWhitespace(line);
    if (token.empty())
      Fail(ErrorCode::kInvalidArgument, "blank line in vocabulary file");
    if (vocab.Contains(token))
      Fail(ErrorCode::kInvalidArgument,
           "duplicate mnemonic in vocabulary file: " + std::string(token));
    vocab.Add(token);
  }
  return vocab;
}

uint64_t Vocabulary::Fingerprint() const {
  return Fnv1a64(ToText());
}

Vocabulary BuildVocabulary(std::span<const FunctionRecord> records) {
  Vocabulary vocab;
  for (const FunctionRecord& record : records) {
    for (const std::string& op : record.opcodes)
      vocab.Add(op);
  }
  return vocab;
}

std::vector<int32_t> Tokenize(std::span<const std::string> opcodes,
                              const Vocabulary& vocab, size_t max_len) {
  if (max_len == 0)
    Fail(ErrorCode::kInvalidArgument, "max_len must be positive");
  const size_t n = std::min(opcodes.size(), max_len);
  std::vector<int32_t> ids;
  ids.reserve(n);
  for (size_t i = 0; i < n; ++i)
    ids.push_back(vocab.IdOf(opcodes[i]));
  return ids;
}

std::vector<int32_t> Tokenize(const FunctionRecord& record,
                              const Vocabulary& vocab, size_t max_len) {
  return Tokenize(record.opcodes, vocab, max_len);
}

}  // namespace bcfp
