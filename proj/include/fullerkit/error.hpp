#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace fullerkit {

enum class ErrorCode {
  InvalidArgument,
  OffManifold,
  ParamOutOfRange,
  EmptyNet,
  StepSizeUnderflow,
  NoConvergence,
  DegenerateSection,
  DegenerateUnresolved,
  NotReebOrbit,
  DegeneratePath,
  MissingIndex,
  Indeterminate,
  StartInvalid,
  MultiplicityTooHigh,
  ShiftMismatch,
  DegenerateLift,
  DegenerateContact,
  MuTooLarge,
  NotReebBranch,
  ParseError,
  UnknownBuiltin,
  SchemaViolation,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OffManifold: return "OffManifold";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::EmptyNet: return "EmptyNet";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateSection: return "DegenerateSection";
    case ErrorCode::DegenerateUnresolved: return "DegenerateUnresolved";
    case ErrorCode::NotReebOrbit: return "NotReebOrbit";
    case ErrorCode::DegeneratePath: return "DegeneratePath";
    case ErrorCode::MissingIndex: return "MissingIndex";
    case ErrorCode::Indeterminate: return "Indeterminate";
    case ErrorCode::StartInvalid: return "StartInvalid";
    case ErrorCode::MultiplicityTooHigh: return "MultiplicityTooHigh";
    case ErrorCode::ShiftMismatch: return "ShiftMismatch";
    case ErrorCode::DegenerateLift: return "DegenerateLift";
    case ErrorCode::DegenerateContact: return "DegenerateContact";
    case ErrorCode::MuTooLarge: return "MuTooLarge";
    case ErrorCode::NotReebBranch: return "NotReebBranch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownBuiltin: return "UnknownBuiltin";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library. `details` carries structured evidence
/// (partial sums, witnesses, ...) that the CLI forwards into its report.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, nlohmann::json details = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace fullerkit
