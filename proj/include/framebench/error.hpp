#pragma once

#include <stdexcept>
#include <string>

namespace framebench {

/// Base of every error raised by the library. Each subclass names a failure
/// category so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed object: wrong grid shape, out-of-range strategy index.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Well-formed input outside an operation's domain (e.g. PD check on a 3x3).
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// All attempts of a provider call failed. Carries the last status seen.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int last_status = 0, int attempts = 0)
        : Error(what), last_status_(last_status), attempts_(attempts) {}

    [[nodiscard]] int last_status() const noexcept { return last_status_; }
    [[nodiscard]] int attempts() const noexcept { return attempts_; }

private:
    int last_status_;
    int attempts_;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class JudgeParseError : public Error {
public:
    using Error::Error;
};

/// Feature vector or model schema disagreement.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Unreadable or inconsistent input file.
class FormatError : public Error {
public:
    using Error::Error;
};

class MigrationError : public Error {
public:
    MigrationError(int found, int supported)
        : Error("unsupported schema_version " + std::to_string(found) + " (this build reads version " +
                std::to_string(supported) + "); migrate the file or rerun the stage"),
          found_(found),
          supported_(supported) {}

    [[nodiscard]] int found() const noexcept { return found_; }
    [[nodiscard]] int supported() const noexcept { return supported_; }

private:
    int found_;
    int supported_;
};

class DegenerateDataError : public Error {
public:
    using Error::Error;
};

}  // namespace framebench
