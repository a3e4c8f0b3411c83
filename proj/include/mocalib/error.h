#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mocalib {

enum class ErrorKind {
  InvalidArgument,
  NonFinite,
  DegenerateConfiguration,
  NoValidSample,
  InsufficientConsensus,
  EmptyActiveSet,
  InfeasibleRig,
  ParseError,
  DimensionMismatch,
  UnsupportedVersion,
  NonFiniteValue,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind);

// Every failure surfaced by the library is an Error carrying its kind, so
// callers (the CLI in particular) can map kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mocalib
