#pragma once

#include <stdexcept>
#include <string>

namespace pbcbf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A non-finite value appeared during evaluation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// State outside the region where a model is defined (1/r, 1/U guards).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Stop event never fired before the propagation horizon.
class HorizonExceeded : public Error {
public:
    using Error::Error;
};

/// The prediction policy did not make the barrier rate vanish in time.
class PolicyFailure : public Error {
public:
    using Error::Error;
};

class SingularMassMatrix : public Error {
public:
    using Error::Error;
};

class TrimNotConverged : public Error {
public:
    TrimNotConverged(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class ZeroGradient : public Error {
public:
    using Error::Error;
};

class MultipleActive : public Error {
public:
    using Error::Error;
};

class UnsupportedDimension : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

/// Scenario documents that fail validation.
class ScenarioError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace pbcbf
