#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace opsrag {

enum class Errc {
  kMalformedMarkup,
  kEmptyDocument,
  kFormatError,
  kBackendUnavailable,
  kExhaustedEscalation,
  kEmptyInput,
  kDegenerateBatch,
  kNonFiniteLoss,
  kDimensionMismatch,
  kZeroVector,
  kDuplicateId,
  kIoError,
  kCorruptFile,
  kTemplateMissing,
  kEmptyIndex,
  kPositiveLogProb,
  kBindError,
  kMissingArtifacts,
  kEmptyEvalSet,
  kJudgeUnparseable,
  kConfigError,
  kInvalidArgument,
  kNotFound,
};

std::string_view to_string(Errc code);

// All library failures surface as this exception; the code identifies the
// contract that was violated and what() carries the detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace opsrag
