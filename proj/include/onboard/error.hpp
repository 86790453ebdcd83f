#pragma once

#include <stdexcept>
#include <string>

namespace onboard {

// Every failure raised by the library derives from Error. The CLI maps
// IoError to exit code 3 and everything else to 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Shapes that do not agree (conv channels, linear dims, grid sizes).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Semantically invalid input values or arguments.
class ValidationError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorKind {
    bad_magic,
    unsupported_version,
    bad_header,
    truncated,
    shape_mismatch,
    trailing_data,
    non_finite,
    out_of_range,
    duplicate_name,
};

const char* to_string(FormatErrorKind kind);

// Malformed binary files (.rvwt, .rvsc). The kind is the variant the caller
// dispatches on; the message carries location details.
class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& detail)
        : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

inline const char* to_string(FormatErrorKind kind) {
    switch (kind) {
    case FormatErrorKind::bad_magic: return "bad magic";
    case FormatErrorKind::unsupported_version: return "unsupported version";
    case FormatErrorKind::bad_header: return "bad header";
    case FormatErrorKind::truncated: return "truncated";
    case FormatErrorKind::shape_mismatch: return "shape mismatch";
    case FormatErrorKind::trailing_data: return "trailing data";
    case FormatErrorKind::non_finite: return "non-finite value";
    case FormatErrorKind::out_of_range: return "value out of range";
    case FormatErrorKind::duplicate_name: return "duplicate name";
    }
    return "format error";
}

}  // namespace onboard
