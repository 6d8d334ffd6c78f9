#pragma once

#include <stdexcept>
#include <string>

namespace tapkin {

// Base class for every failure the library reports. Callers that only care
// about "did it work" catch this; the C API maps the subclasses to codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: violated invariants, malformed files, unknown labels.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The numerics gave up: integrator failure, rank deficiency, negative states.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tapkin
