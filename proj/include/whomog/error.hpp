#pragma once

#include <stdexcept>
#include <string>

namespace whomog {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad axis, bad index, a >= b, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two mesh objects were combined although they live on different grids.
class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& where)
        : Error(where + ": operands live on different grids") {}
};

/// Right-hand side of the pure Poisson problem is not orthogonal to constants.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

/// An iterative solver did not reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature returned a non-finite value or missed its tolerance badly.
class QuadratureError : public Error {
public:
    using Error::Error;
};

/// The explicit time stepper would need more steps than allowed.
class StepSizeUnderflow : public Error {
public:
    using Error::Error;
};

/// A coefficient field violates θ⁻¹ ≤ a ≤ θ.
class EllipticityError : public Error {
public:
    using Error::Error;
};

/// An experiment configuration failed validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace whomog
