#pragma once

#include <stdexcept>
#include <string>

namespace phantom {

/// Invalid input: bad configuration, violated precondition. CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical stage failed (no convergence, missed root). CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phantom
