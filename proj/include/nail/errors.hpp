// Copyright 2026 The nail Authors
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nail {

/// Malformed input data: bad file contents, duplicate ids, unparsable fields.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted artifact was produced under different settings (format
/// version, vocabulary) than the ones it is being loaded with.
class IncompatibleError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// An operation was called with an out-of-range argument.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal invariant was violated (non-finite gradients, corrupt state).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace nail
