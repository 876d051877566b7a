#pragma once

#include <stdexcept>
#include <string>

namespace dirmc {

// Exception hierarchy. The CLI maps each family onto an exit code:
// ValidationError -> 2, GenerationError -> 3, NumericalError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirmc
