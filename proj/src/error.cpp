#include "strkit/error.hpp"

namespace strkit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord:
      return "MalformedRecord";
    case ErrorKind::DuplicateId:
      return "DuplicateId";
    case ErrorKind::EmptyCorpus:
      return "EmptyCorpus";
    case ErrorKind::SubsetTooLarge:
      return "SubsetTooLarge";
    case ErrorKind::UnknownTokenId:
      return "UnknownTokenId";
    case ErrorKind::SpanOutOfRange:
      return "SpanOutOfRange";
    case ErrorKind::AlreadyEmphasized:
      return "AlreadyEmphasized";
    case ErrorKind::InvalidTarget:
      return "InvalidTarget";
    case ErrorKind::SpanMissing:
      return "SpanMissing";
    case ErrorKind::InvalidConfig:
      return "InvalidConfig";
    case ErrorKind::FormatError:
      return "FormatError";
    case ErrorKind::ShapeMismatch:
      return "ShapeMismatch";
    case ErrorKind::SequenceTooLong:
      return "SequenceTooLong";
    case ErrorKind::EmptyInput:
      return "EmptyInput";
    case ErrorKind::TooShort:
      return "TooShort";
    case ErrorKind::KOutOfRange:
      return "KOutOfRange";
    case ErrorKind::EmptyGrid:
      return "EmptyGrid";
    case ErrorKind::InvalidCombination:
      return "InvalidCombination";
    case ErrorKind::IoError:
      return "IoError";
  }
  return "Error";
}

}  // namespace strkit
