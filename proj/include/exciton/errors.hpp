#pragma once

#include <stdexcept>
#include <string>

namespace exciton {

/// Malformed or inconsistent input (bad sizes, out-of-range indices, bad config).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The random interface reaches the top of the film, so the mapped domain degenerates.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A linear solve or an iteration failed.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double residual = -1.0)
        : std::runtime_error(what), residual_(residual) {}

    /// Residual norm at failure, or -1 when no residual is available.
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Requested feature lies outside what is implemented (e.g. expansion order > 2).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace exciton
