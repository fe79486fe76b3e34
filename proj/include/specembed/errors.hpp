#pragma once

#include <stdexcept>
#include <string>

namespace specembed {

// Base class for all recoverable toolkit errors. The CLI maps these to
// exit code 1; anything else escaping to main is treated as an internal
// invariant violation (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values: out-of-range labels, bad rates, empty inputs,
// malformed configs.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Unparseable or unsupported bytes: tensor files, WAV headers, manifests.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally valid data that violates dataset-level contracts: missing
// files, wrong region counts, evaluation pools missing the true answer.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace specembed
