#pragma once

#include <stdexcept>
#include <string>

namespace blowuplab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter record violates its invariants (e.g. A below the variant threshold).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of a closed-form function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An operation precondition does not hold for the supplied state.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

/// The reaction term cannot be evaluated over the requested step.
class StepOverflowError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// The blowup core is resolved by too few grid nodes.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace blowuplab
