#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gwmodel {

enum class ErrorCode {
  // input / configuration problems
  NonFiniteValue,
  DuplicateName,
  EmptyDataset,
  GeographicRangeViolation,
  UnknownColumn,
  InvalidSelection,
  InvalidPower,
  InvalidKernel,
  AdaptiveCountExceedsN,
  InvalidArgument,
  KEqualsM,
  MissingColumn,
  ParseError,
  EmptyFile,
  IoError,
  // numerical failures
  ZeroVariance,
  ZeroWeightSum,
  DegenerateLocalDistribution,
  ZeroMean,
  InsufficientLocalData,
  SingularLocalCovariance,
  DegenerateSubset,
  SingularLocalFit,
  AiccUndefined,
  NonFiniteScore,
  AllScoresNonFinite,
  TooFewAfterFilter,
  ZeroColumn,
  SingularCorrelationMatrix,
  ScoresUnavailable,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept
{
  switch (code) {
  case ErrorCode::NonFiniteValue: return "NonFiniteValue";
  case ErrorCode::DuplicateName: return "DuplicateName";
  case ErrorCode::EmptyDataset: return "EmptyDataset";
  case ErrorCode::GeographicRangeViolation: return "GeographicRangeViolation";
  case ErrorCode::UnknownColumn: return "UnknownColumn";
  case ErrorCode::InvalidSelection: return "InvalidSelection";
  case ErrorCode::InvalidPower: return "InvalidPower";
  case ErrorCode::InvalidKernel: return "InvalidKernel";
  case ErrorCode::AdaptiveCountExceedsN: return "AdaptiveCountExceedsN";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::KEqualsM: return "KEqualsM";
  case ErrorCode::MissingColumn: return "MissingColumn";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::EmptyFile: return "EmptyFile";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::ZeroVariance: return "ZeroVariance";
  case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
  case ErrorCode::DegenerateLocalDistribution: return "DegenerateLocalDistribution";
  case ErrorCode::ZeroMean: return "ZeroMean";
  case ErrorCode::InsufficientLocalData: return "InsufficientLocalData";
  case ErrorCode::SingularLocalCovariance: return "SingularLocalCovariance";
  case ErrorCode::DegenerateSubset: return "DegenerateSubset";
  case ErrorCode::SingularLocalFit: return "SingularLocalFit";
  case ErrorCode::AiccUndefined: return "AiccUndefined";
  case ErrorCode::NonFiniteScore: return "NonFiniteScore";
  case ErrorCode::AllScoresNonFinite: return "AllScoresNonFinite";
  case ErrorCode::TooFewAfterFilter: return "TooFewAfterFilter";
  case ErrorCode::ZeroColumn: return "ZeroColumn";
  case ErrorCode::SingularCorrelationMatrix: return "SingularCorrelationMatrix";
  case ErrorCode::ScoresUnavailable: return "ScoresUnavailable";
  }
  return "Unknown";
}

/// True for errors caused by bad input or configuration rather than by the
/// numerics of a model fit. The CLI maps these to exit code 1.
inline constexpr bool is_validation_error(ErrorCode code) noexcept
{
  return code <= ErrorCode::IoError;
}

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// A local fit failed at a particular location.
class LocalFitError : public Error {
public:
  LocalFitError(ErrorCode code, long location, double condition_number, const std::string& message)
    : Error(code, message + " (location " + std::to_string(location) + ", condition number "
                      + std::to_string(condition_number) + ")"),
      location_(location), condition_number_(condition_number)
  {
  }

  long location() const noexcept { return location_; }
  double condition_number() const noexcept { return condition_number_; }

private:
  long location_;
  double condition_number_;
};

} // namespace gwmodel
