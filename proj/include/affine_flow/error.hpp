#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace affine_flow {

enum class ErrorKind {
  InvalidInput,
  IncompatibleGrids,
  ImmersionFailure,
  ConvexityFailure,
  Conditioning,
  Domain,
  Index,
  DegenerateHessian,
  DtTooLarge,
  Extinct,
  Stencil,
  Precondition,
  Parse,
  Validation,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::IncompatibleGrids: return "incompatible-grids";
    case ErrorKind::ImmersionFailure: return "immersion-failure";
    case ErrorKind::ConvexityFailure: return "convexity-failure";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Index: return "index";
    case ErrorKind::DegenerateHessian: return "degenerate-hessian";
    case ErrorKind::DtTooLarge: return "dt-too-large";
    case ErrorKind::Extinct: return "extinct";
    case ErrorKind::Stencil: return "stencil";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Library-wide exception. `payload` carries a numeric detail when one is
/// meaningful (condition number, violation magnitude, offending time, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<double> payload = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        payload_(payload) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> payload() const noexcept { return payload_; }

 private:
  ErrorKind kind_;
  std::optional<double> payload_;
};

}  // namespace affine_flow
