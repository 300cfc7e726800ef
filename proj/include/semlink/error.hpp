// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace semlink {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not conform for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Real tensor given where complex is required, or vice versa.
class DtypeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, non-positive pivots, zero norms.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (bad ranges, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File-system or format errors; messages always carry the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace semlink
