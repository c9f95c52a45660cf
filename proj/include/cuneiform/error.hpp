#pragma once

#include <stdexcept>
#include <string>

namespace cuneiform {

// Every library failure derives from Error. The CLI maps each kind onto a
// stable process exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: mismatched lengths, ids out of range, bad labels.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape or size disagreement between two structures (image vs model, cache vs params).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A rectangle or index outside the image it refers to.
class BoundsError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file exists but its contents are not in the expected format.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A developer check (gradient check) did not pass.
class VerificationError : public Error {
 public:
  using Error::Error;
};

// 0 success, 2 config/structure, 3 I/O, 4 training, 5 verification.
int exit_code(const Error& e) noexcept;

}  // namespace cuneiform
