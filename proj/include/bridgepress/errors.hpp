#pragma once

#include <stdexcept>
#include <string>

namespace bridgepress {

/// Root of every error thrown by the library. The CLI maps each subclass to
/// an exit code (see `exit_code_for`).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition that is not a shape problem (non-scalar
/// loss, normalized map where physical units are required, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Data / file errors.
class FormatError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class VerificationError : public Error {
 public:
  using Error::Error;
};

/// Process exit status for a failure: 2 configuration, 3 data or format,
/// 4 verification, 1 anything else.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const VerificationError*>(&e)) return 4;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const LengthError*>(&e) ||
      dynamic_cast<const UnsupportedVersionError*>(&e) || dynamic_cast<const ManifestError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const ContractError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e)) {
    return 3;
  }
  return 1;
}

}  // namespace bridgepress
