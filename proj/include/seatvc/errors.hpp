#pragma once

#include <stdexcept>
#include <string>

namespace seatvc {

/// Bad input: schema violations, precondition failures, unusable configs.
/// The CLI maps this to exit code 2.
class InvalidInput : public std::runtime_error {
  public:
    explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure during fitting: singular systems, non-convergence,
/// diverging simulations. The CLI maps this to exit code 1.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seatvc
