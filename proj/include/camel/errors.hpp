#pragma once

#include <stdexcept>
#include <string>

namespace camel {

/// Problem reading or writing one of the binary file formats.
class FormatError : public std::runtime_error {
public:
    enum class Kind { Io, BadMagic, BadVersion, Truncated, UnknownScheme, Invalid };

    FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline const char* format_error_kind(FormatError::Kind k) {
    switch (k) {
        case FormatError::Kind::Io: return "io";
        case FormatError::Kind::BadMagic: return "bad magic";
        case FormatError::Kind::BadVersion: return "bad version";
        case FormatError::Kind::Truncated: return "truncated";
        case FormatError::Kind::UnknownScheme: return "unknown scheme";
        case FormatError::Kind::Invalid: return "invalid";
    }
    return "?";
}

/// Malformed configuration; the message names the key and line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace camel
