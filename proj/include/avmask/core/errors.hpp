// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace avmask {

// Base of every error raised by the library. Subclasses let callers (and the
// CLI exit-code mapping) tell failure kinds apart without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or a value outside an op's domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid hyper-parameter (stride < 1, lr <= 0, even blur kernel, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Misuse of the autodiff tape (non-scalar loss, double backward, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

// File I/O and on-disk format errors. Each carries the offending path.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// File exists but its contents do not follow the expected layout.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ManifestMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnknownTensorError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Checkpoint tensor whose extents do not match the model it is loaded into.
class TensorShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace avmask
