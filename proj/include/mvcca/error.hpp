#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvcca {

enum class ErrorKind {
  NotPositiveDefinite,
  NotSymmetric,
  NoConvergence,
  DimensionMismatch,
  SampleCountMismatch,
  TooFewSamples,
  ConfigError,
  UnknownView,
  IoError,
  FormatError,
  EmptyInput,
  DegenerateInput,
  EmptyBank,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SampleCountMismatch: return "SampleCountMismatch";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UnknownView: return "UnknownView";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::EmptyBank: return "EmptyBank";
  }
  return "Unknown";
}

/// Every failure raised by the library. `kind()` identifies the category,
/// `what()` carries "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mvcca
