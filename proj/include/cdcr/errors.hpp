#pragma once

#include <stdexcept>
#include <string>

namespace cdcr {

enum class ErrorCode {
  validation,
  cross_document,
  schema,
  conflict,
  insufficient_metadata,
  format,
  empty_span,
  degenerate_vector,
  dimension_mismatch,
  stale_claim,
  unknown_pair,
  unknown_mention,
  unknown_annotator,
  duplicate_pair,
  insufficient_data,
  undefined_statistic,
  not_a_partition,
  asymmetric_matrix,
  cap_reached,
  storage,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::cross_document: return "cross_document";
    case ErrorCode::schema: return "schema";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::insufficient_metadata: return "insufficient_metadata";
    case ErrorCode::format: return "format";
    case ErrorCode::empty_span: return "empty_span";
    case ErrorCode::degenerate_vector: return "degenerate_vector";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::stale_claim: return "stale_claim";
    case ErrorCode::unknown_pair: return "unknown_pair";
    case ErrorCode::unknown_mention: return "unknown_mention";
    case ErrorCode::unknown_annotator: return "unknown_annotator";
    case ErrorCode::duplicate_pair: return "duplicate_pair";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::undefined_statistic: return "undefined_statistic";
    case ErrorCode::not_a_partition: return "not_a_partition";
    case ErrorCode::asymmetric_matrix: return "asymmetric_matrix";
    case ErrorCode::cap_reached: return "cap_reached";
    case ErrorCode::storage: return "storage";
  }
  return "unknown";
}

// All library failures surface as this exception; `code()` is stable and is
// what the HTTP layer maps to status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Per-record problem found while reading a line-oriented file. Reading
// continues past these.
struct RecordError {
  std::size_t line = 0;
  ErrorCode code = ErrorCode::schema;
  std::string message;
};

}  // namespace cdcr
