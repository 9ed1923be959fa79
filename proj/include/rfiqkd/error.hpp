#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfiqkd {

enum class ErrorCode {
  InvalidOperator,
  IncompletePovm,
  NonPositiveEffect,
  NonPhysicalEffect,
  DegenerateOperator,
  UnrepairablePovm,
  DomainError,
  InfeasiblePair,
  InvalidWindow,
  EmptyInput,
  InsufficientPhaseCoverage,
  DegenerateHull,
  NotAnEllipse,
  InconsistentFit,
  GramInconsistent,
  CoverageTooLow,
  Infeasible,
  MaxIterations,
  ConfigError,
  IoError,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidOperator: return "InvalidOperator";
    case ErrorCode::IncompletePovm: return "IncompletePovm";
    case ErrorCode::NonPositiveEffect: return "NonPositiveEffect";
    case ErrorCode::NonPhysicalEffect: return "NonPhysicalEffect";
    case ErrorCode::DegenerateOperator: return "DegenerateOperator";
    case ErrorCode::UnrepairablePovm: return "UnrepairablePovm";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InfeasiblePair: return "InfeasiblePair";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientPhaseCoverage: return "InsufficientPhaseCoverage";
    case ErrorCode::DegenerateHull: return "DegenerateHull";
    case ErrorCode::NotAnEllipse: return "NotAnEllipse";
    case ErrorCode::InconsistentFit: return "InconsistentFit";
    case ErrorCode::GramInconsistent: return "GramInconsistent";
    case ErrorCode::CoverageTooLow: return "CoverageTooLow";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can dispatch on the error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// what() without the code prefix, for rethrowing under another code.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace rfiqkd
