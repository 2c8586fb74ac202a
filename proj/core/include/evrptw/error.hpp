#pragma once

#include <stdexcept>
#include <string>

namespace evrptw {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// The generator ran out of retries for some validity check.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// An action outside the current feasibility mask reached env::step.
class MaskViolation : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

}  // namespace evrptw
