#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cobridge {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed timestamp, duration or config text. `field()` names the part that failed.
class ParseError : public Error {
public:
    ParseError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class EncodeError : public Error {
public:
    using Error::Error;
};

/// Payload could not be turned into a record. `offset()` is the byte offset of the failure.
class DecodeError : public Error {
public:
    DecodeError(const std::string& message, std::size_t offset)
        : Error(message + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

/// API called out of lifecycle order, unknown variable names, kind mismatches.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Scenario or config value rejected. `key()` is the dotted config key.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& message)
        : Error(key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace cobridge
