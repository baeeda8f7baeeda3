#pragma once

#include <stdexcept>
#include <string>

namespace hchc {

// Error taxonomy. The CLI maps each family onto a distinct exit status.

/// Caller supplied something the operation cannot accept (shape, range, arity).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content. `where` carries the location, e.g. "row 3, column 2".
class ParseError : public InputError {
public:
    ParseError(const std::string& path, const std::string& where, const std::string& what)
        : InputError(path + ": " + where + ": " + what) {}
};

/// Bad configuration entry; the message always names the offending key.
class ConfigError : public InputError {
public:
    ConfigError(const std::string& key, const std::string& what)
        : InputError("config key '" + key + "': " + what), key_(key) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

/// Optimization produced a non-finite loss, gradient, or activation.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layout input has no usable geometry (e.g. all clusters perfectly similar).
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hchc
