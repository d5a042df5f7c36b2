#pragma once

#include <stdexcept>
#include <string>

namespace strkit {

enum class ErrorKind {
  MalformedRecord,
  DuplicateId,
  EmptyCorpus,
  SubsetTooLarge,
  UnknownTokenId,
  SpanOutOfRange,
  AlreadyEmphasized,
  InvalidTarget,
  SpanMissing,
  InvalidConfig,
  FormatError,
  ShapeMismatch,
  SequenceTooLong,
  EmptyInput,
  TooShort,
  KOutOfRange,
  EmptyGrid,
  InvalidCombination,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the whole toolkit; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace strkit
