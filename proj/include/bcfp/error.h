#ifndef BCFP_ERROR_H_
#define BCFP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace bcfp {

enum class ErrorCode {
  kInvalidArgument,
  kMalformedRecord,
  kSchemaError,
  kDuplicateVerdictKey,
  kInsufficientClass,
  kEmptyCorpus,
  kEmptySequence,
  kEmptyDataset,
  kShapeMismatch,
  kNonFiniteValue,
  kOddDimension,
  kUnknownTokenId,
  kSingleClass,
  kDimensionMismatch,
  kLengthMismatch,
  kNoPositives,
  kInvalidSpec,
  kConfigError,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures that abort an operation are reported through this
// type. Recoverable per-item problems (a malformed log record, a bad trace
// object) are collected as diagnostics instead and never thrown.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace bcfp

#endif  // BCFP_ERROR_H_
