#include "tomsim/error.hpp"

namespace tomsim {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AlternationViolation: return "E_ALTERNATION_VIOLATION";
    case ErrorCode::EmptyUtterance: return "E_EMPTY_UTTERANCE";
    case ErrorCode::UnknownSpeaker: return "E_UNKNOWN_SPEAKER";
    case ErrorCode::InvalidTriple: return "E_INVALID_TRIPLE";
    case ErrorCode::ParseFailure: return "E_PARSE_FAILURE";
    case ErrorCode::UnknownTarget: return "E_UNKNOWN_TARGET";
    case ErrorCode::EmptyResult: return "E_EMPTY_RESULT";
    case ErrorCode::ZeroMass: return "E_ZERO_MASS";
    case ErrorCode::EmptyLedger: return "E_EMPTY_LEDGER";
    case ErrorCode::InvalidPlanOp: return "E_INVALID_PLAN_OP";
    case ErrorCode::TransportError: return "E_TRANSPORT";
    case ErrorCode::RateLimited: return "E_RATE_LIMITED";
    case ErrorCode::ScriptExhausted: return "E_SCRIPT_EXHAUSTED";
    case ErrorCode::ScriptParseError: return "E_SCRIPT_PARSE";
    case ErrorCode::EmptyCompletion: return "E_EMPTY_COMPLETION";
    case ErrorCode::EmbeddingDimensionMismatch: return "E_EMBEDDING_DIMENSION";
    case ErrorCode::MissingPlaceholder: return "E_MISSING_PLACEHOLDER";
    case ErrorCode::UnknownTemplate: return "E_UNKNOWN_TEMPLATE";
    case ErrorCode::NoTriplesFound: return "E_NO_TRIPLES";
    case ErrorCode::PreconditionViolation: return "E_PRECONDITION";
    case ErrorCode::MissingPrediction: return "E_MISSING_PREDICTION";
    case ErrorCode::MissingColumn: return "E_MISSING_COLUMN";
    case ErrorCode::EmptyCorpus: return "E_EMPTY_CORPUS";
    case ErrorCode::InsufficientCorpus: return "E_INSUFFICIENT_CORPUS";
    case ErrorCode::NoResults: return "E_NO_RESULTS";
    case ErrorCode::EmptyCurve: return "E_EMPTY_CURVE";
    case ErrorCode::IoError: return "E_IO";
    case ErrorCode::InvalidConfig: return "E_INVALID_CONFIG";
    case ErrorCode::InvalidTrace: return "E_INVALID_TRACE";
  }
  return "E_UNKNOWN";
}

bool is_backend_failure(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TransportError:
    case ErrorCode::RateLimited:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::EmptyCompletion:
    case ErrorCode::EmbeddingDimensionMismatch:
    case ErrorCode::NoTriplesFound:
    case ErrorCode::ParseFailure:
      return true;
    default:
      return false;
  }
}

}  // namespace tomsim
