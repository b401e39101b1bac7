#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causalnet {

// Machine-readable failure codes shared by the library, the CLI and the HTTP API.
enum class ErrorCode {
  CatalogMiss,
  InvalidCatalog,
  InvalidLink,
  EmptyNetwork,
  IndexOutOfRange,
  ActionDisabledByProfile,
  TooFewExperts,
  NotOnWorklist,
  MissingDecision,
  ScoreOutOfRange,
  MissingCredibility,
  NetworkNotAccepted,
  ConstantVector,
  TooFewPairs,
  EmptyAggregate,
  PartialMatrix,
  ZeroRow,
  InvalidArgument,
  NoTruePath,
  AlreadyDecided,
  UnknownRecord,
  WrongStage,
  MalformedAnswers,
  OutOfRange,
  CohortClosed,
  CohortOpen,
  UnknownSession,
  UnknownCohort,
  EmptyAcceptedSet,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::CatalogMiss: return "CatalogMiss";
    case ErrorCode::InvalidCatalog: return "InvalidCatalog";
    case ErrorCode::InvalidLink: return "InvalidLink";
    case ErrorCode::EmptyNetwork: return "EmptyNetwork";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ActionDisabledByProfile: return "ActionDisabledByProfile";
    case ErrorCode::TooFewExperts: return "TooFewExperts";
    case ErrorCode::NotOnWorklist: return "NotOnWorklist";
    case ErrorCode::MissingDecision: return "MissingDecision";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::MissingCredibility: return "MissingCredibility";
    case ErrorCode::NetworkNotAccepted: return "NetworkNotAccepted";
    case ErrorCode::ConstantVector: return "ConstantVector";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::EmptyAggregate: return "EmptyAggregate";
    case ErrorCode::PartialMatrix: return "PartialMatrix";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoTruePath: return "NoTruePath";
    case ErrorCode::AlreadyDecided: return "AlreadyDecided";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::WrongStage: return "WrongStage";
    case ErrorCode::MalformedAnswers: return "MalformedAnswers";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::CohortClosed: return "CohortClosed";
    case ErrorCode::CohortOpen: return "CohortOpen";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownCohort: return "UnknownCohort";
    case ErrorCode::EmptyAcceptedSet: return "EmptyAcceptedSet";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace causalnet
