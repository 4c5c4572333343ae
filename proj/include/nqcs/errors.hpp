#pragma once

#include <stdexcept>
#include <string>

namespace nqcs {

/// Root of every error raised by the workbench.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid user configuration. `invariant` names the violated rule.
class ConfigError : public Error {
public:
    ConfigError(std::string invariant, const std::string& what)
        : Error(what), invariant_(std::move(invariant)) {}
    explicit ConfigError(const std::string& what) : Error(what) {}

    const std::string& invariant() const noexcept { return invariant_; }

private:
    std::string invariant_;
};

/// Block decomposition whose transform is too close to singular to be trusted.
class IllConditionedDecomposition : public Error {
public:
    IllConditionedDecomposition(double condition, const std::string& what)
        : Error(what), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Partition refinement hit its iteration cap with the envelope still too loose.
class TightnessNotAchieved : public Error {
public:
    TightnessNotAchieved(double varpi, const std::string& what) : Error(what), varpi_(varpi) {}

    double varpi() const noexcept { return varpi_; }

private:
    double varpi_;
};

class CertificateInvalid : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

class HorizonTooShort : public Error {
public:
    HorizonTooShort(double tailFraction, const std::string& what)
        : Error(what), tailFraction_(tailFraction) {}

    double tailFraction() const noexcept { return tailFraction_; }

private:
    double tailFraction_;
};

}  // namespace nqcs
