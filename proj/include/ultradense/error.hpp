#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ultradense {

enum class ErrorKind {
  InvalidMatrix,
  DegenerateMatrix,
  InvalidDimension,
  DimensionMismatch,
  ParseError,
  DuplicateWord,
  InvalidValue,
  IoError,
  LabelDomainError,
  EmptyResource,
  InsufficientVocabulary,
  EmptyIntersection,
  MissingClass,
  OverlappingSubspaces,
  UnknownProperty,
  NeedsLinearMap,
  UndefinedCorrelation,
  DegenerateInput,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateWord: return "DuplicateWord";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::LabelDomainError: return "LabelDomainError";
    case ErrorKind::EmptyResource: return "EmptyResource";
    case ErrorKind::InsufficientVocabulary: return "InsufficientVocabulary";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::MissingClass: return "MissingClass";
    case ErrorKind::OverlappingSubspaces: return "OverlappingSubspaces";
    case ErrorKind::UnknownProperty: return "UnknownProperty";
    case ErrorKind::NeedsLinearMap: return "NeedsLinearMap";
    case ErrorKind::UndefinedCorrelation: return "UndefinedCorrelation";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` is stable and is what callers
/// (and the CLI's exit-code mapping) dispatch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix, for wrapping with more context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace ultradense
