#include "bcfp/error.h"

namespace bcfp {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kMalformedRecord:
      return "MalformedRecord";
    case ErrorCode::kSchemaError:
      return "SchemaError";
    case ErrorCode::kDuplicateVerdictKey:
      return "DuplicateVerdictKey";
    case ErrorCode::kInsufficientClass:
      return "InsufficientClass";
    case ErrorCode::kEmptyCorpus:
      return "EmptyCorpus";
    case ErrorCode::kEmptySequence:
      return "EmptySequence";
    case ErrorCode::kEmptyDataset:
      return "EmptyDataset";
    case ErrorCode::kShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue:
      return "NonFiniteValue";
    case ErrorCode::kOddDimension:
      return "OddDimension";
    case ErrorCode::kUnknownTokenId:
      return "UnknownTokenID";
    case ErrorCode::kSingleClass:
      return "SingleClass";
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kLengthMismatch:
      return "LengthMismatch";
    case ErrorCode::kNoPositives:
      return "NoPositives";
    case ErrorCode::kInvalidSpec:
      return "InvalidSpec";
    case ErrorCode::kConfigError:
      return "ConfigError";
    case ErrorCode::kIoError:
      return "IOError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace bcfp
