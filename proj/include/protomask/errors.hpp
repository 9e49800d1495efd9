// Copyright (C) 2026 The protomask Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace protomask {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions of the operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a forward or backward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in the wrong state (e.g. stepping without gradients).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A box with non-positive width or height where a proper box is required.
class DegenerateBoxError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. The message names the offending field.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed data that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace protomask
