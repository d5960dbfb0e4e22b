#pragma once

#include <stdexcept>
#include <string>

namespace goldsift {

// Exit-code classes used by the CLI: config -> 2, backend -> 3, data -> 4.

// Bad flags, bad config files, incompatible run fingerprints.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed datasets, corrupt stores, unknown ids.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class BackendError : public std::runtime_error {
public:
    enum class Kind {
        ContextOverflow,
        Unavailable,
        SpanAlignment,
        DimensionDrift,
        NotSupported,
    };

    BackendError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Template rendering failures (unknown placeholder, bad syntax).
class TemplateError : public std::runtime_error {
public:
    explicit TemplateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace goldsift
