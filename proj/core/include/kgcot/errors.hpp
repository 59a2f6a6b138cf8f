#pragma once
#include <stdexcept>
#include <string>

namespace kgcot {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file could not be parsed; message carries file and line context.
class IngestError : public Error {
public:
    using Error::Error;
};

/// A graph/index lookup was asked for something that does not exist.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Run configuration is invalid or references unresolvable paths.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Prompt template rendering failed (missing or unknown slot, empty required slot).
class TemplateError : public Error {
public:
    using Error::Error;
};

/// Embedding index construction failed (embedder failure, dimension mismatch).
class BuildError : public Error {
public:
    using Error::Error;
};

/// Chat or embedding provider transport failure. Transient failures are
/// retried by the gateway; permanent ones surface immediately.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& msg, bool transient = false)
        : Error(msg), transient_(transient) {}
    bool transient() const { return transient_; }

private:
    bool transient_;
};

/// Authentication/credential failure. Never retried.
class CredentialError : public Error {
public:
    using Error::Error;
};

} // namespace kgcot
