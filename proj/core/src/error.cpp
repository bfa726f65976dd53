#include "opsrag/error.hpp"

namespace opsrag {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kMalformedMarkup: return "MalformedMarkup";
    case Errc::kEmptyDocument: return "EmptyDocument";
    case Errc::kFormatError: return "FormatError";
    case Errc::kBackendUnavailable: return "BackendUnavailable";
    case Errc::kExhaustedEscalation: return "ExhaustedEscalation";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kDegenerateBatch: return "DegenerateBatch";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kZeroVector: return "ZeroVector";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kIoError: return "IoError";
    case Errc::kCorruptFile: return "CorruptFile";
    case Errc::kTemplateMissing: return "TemplateMissing";
    case Errc::kEmptyIndex: return "EmptyIndex";
    case Errc::kPositiveLogProb: return "PositiveLogProb";
    case Errc::kBindError: return "BindError";
    case Errc::kMissingArtifacts: return "MissingArtifacts";
    case Errc::kEmptyEvalSet: return "EmptyEvalSet";
    case Errc::kJudgeUnparseable: return "JudgeUnparseable";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kNotFound: return "NotFound";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace opsrag
