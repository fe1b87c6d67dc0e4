#ifndef DISPLACER_ERROR_HPP
#define DISPLACER_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace displacer {

enum class ErrorCode {
  // sexpr
  UnbalancedParens,
  EmptyInput,
  TrailingGarbage,
  // kb
  NonGroundAssertion,
  UnsafeRule,
  UnsafeNegation,
  UnsafeQuery,
  Unstratifiable,
  DepthLimitExceeded,
  BadForm,
  // vecspace
  BadHeader,
  DimensionMismatch,
  OutOfVocabulary,
  ZeroVector,
  // lexicon
  UnknownConcept,
  // pipelines
  NoCoverage,
  Tie,
  InsufficientData,
  BadK,
  NoKbAnswer,
  // harness
  BadSpec,
  EmptyDataset,
  BadRow,
  BadConfig,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TrailingGarbage: return "TrailingGarbage";
    case ErrorCode::NonGroundAssertion: return "NonGroundAssertion";
    case ErrorCode::UnsafeRule: return "UnsafeRule";
    case ErrorCode::UnsafeNegation: return "UnsafeNegation";
    case ErrorCode::UnsafeQuery: return "UnsafeQuery";
    case ErrorCode::Unstratifiable: return "Unstratifiable";
    case ErrorCode::DepthLimitExceeded: return "DepthLimitExceeded";
    case ErrorCode::BadForm: return "BadForm";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfVocabulary: return "OutOfVocabulary";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
    case ErrorCode::NoCoverage: return "NoCoverage";
    case ErrorCode::Tie: return "Tie";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::NoKbAnswer: return "NoKbAnswer";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadRow: return "BadRow";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code.
/// Parse errors carry a byte offset, loader errors a 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  std::optional<std::size_t> offset() const noexcept { return offset_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

  static Error at_offset(ErrorCode code, std::size_t offset,
                         const std::string& message) {
    Error e(code, message + " at byte " + std::to_string(offset));
    e.offset_ = offset;
    return e;
  }

  static Error at_line(ErrorCode code, std::size_t line,
                       const std::string& message) {
    Error e(code, "line " + std::to_string(line) + ": " + message);
    e.line_ = line;
    return e;
  }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
  std::optional<std::size_t> line_;
};

}  // namespace displacer

#endif  // DISPLACER_ERROR_HPP
