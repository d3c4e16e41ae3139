#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace patcher {

enum class ErrorCode {
  InvalidArgument,
  EmptyIndexList,
  IndexOutOfRange,
  EmptySet,
  TooFewScores,
  SpanOutOfRange,
  SpanMismatch,
  RemoteParserUnavailable,
  LemmaNotFound,
  WordNetUnreadable,
  UnknownImageRef,
  Timeout,
  ProtocolViolation,
  ServerError,
  SingleClassInput,
  WrongVocabularySize,
  IoError,
  MalformedRecord,
  MissingAnnotations,
  NoAnnotators,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyIndexList: return "EmptyIndexList";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::TooFewScores: return "TooFewScores";
    case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
    case ErrorCode::SpanMismatch: return "SpanMismatch";
    case ErrorCode::RemoteParserUnavailable: return "RemoteParserUnavailable";
    case ErrorCode::LemmaNotFound: return "LemmaNotFound";
    case ErrorCode::WordNetUnreadable: return "WordNetUnreadable";
    case ErrorCode::UnknownImageRef: return "UnknownImageRef";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::ServerError: return "ServerError";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::WrongVocabularySize: return "WrongVocabularySize";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MissingAnnotations: return "MissingAnnotations";
    case ErrorCode::NoAnnotators: return "NoAnnotators";
  }
  return "Unknown";
}

// Every failure surfaced by the library. The code identifies the contract
// that was broken; the message carries the details for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace patcher
