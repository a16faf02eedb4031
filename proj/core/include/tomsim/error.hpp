#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tomsim {

enum class ErrorCode {
  AlternationViolation,
  EmptyUtterance,
  UnknownSpeaker,
  InvalidTriple,
  ParseFailure,
  UnknownTarget,
  EmptyResult,
  ZeroMass,
  EmptyLedger,
  InvalidPlanOp,
  TransportError,
  RateLimited,
  ScriptExhausted,
  ScriptParseError,
  EmptyCompletion,
  EmbeddingDimensionMismatch,
  MissingPlaceholder,
  UnknownTemplate,
  NoTriplesFound,
  PreconditionViolation,
  MissingPrediction,
  MissingColumn,
  EmptyCorpus,
  InsufficientCorpus,
  NoResults,
  EmptyCurve,
  IoError,
  InvalidConfig,
  InvalidTrace,
};

// Stable identifier printed by the CLI, e.g. "E_SCRIPT_EXHAUSTED".
std::string_view error_code_name(ErrorCode code) noexcept;

// True for failures that originate in a generation/similarity backend and
// abort an episode rather than indicating a programming error.
bool is_backend_failure(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tomsim
