#pragma once

#include <stdexcept>
#include <string>

namespace spikehe {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad parameter set (no NTT-friendly prime, unknown profile, unsatisfiable depth).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Operands disagree in basis, domain, level or layout.
class StructuralError : public Error {
public:
    using Error::Error;
};

class InvalidAutomorphism : public Error {
public:
    using Error::Error;
};

class LevelExhausted : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class MissingKeyError : public Error {
public:
    MissingKeyError(long index, const std::string& what)
        : Error(what), index_(index) {}
    long index() const { return index_; }

private:
    long index_;
};

class RefreshUnavailable : public Error {
public:
    using Error::Error;
};

class CompareUnavailable : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Planner/caller violated an operation contract (bad rotation index, empty output list).
class ContractError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

}  // namespace spikehe
