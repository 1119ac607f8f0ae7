#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace knife {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise out-of-domain input data.
class InputDomainError : public Error {
 public:
  using Error::Error;
};

// Invalid estimator or configuration parameter (w <= 0, delta outside (0,1), ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedKernelError : public Error {
 public:
  using Error::Error;
};

class MissingClassError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value. `index` locates the offending
// sample or parameter entry.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : Error(what + " (at index " + std::to_string(index) + ")"), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace knife
