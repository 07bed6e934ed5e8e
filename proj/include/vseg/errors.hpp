#pragma once

#include <stdexcept>
#include <string>

namespace vseg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing, unreadable or unwritable files.
struct IoError : Error {
    using Error::Error;
};

// Malformed headers, size mismatches, bad checksums, truncated files.
struct FormatError : Error {
    using Error::Error;
};

// Boxes, patches or shapes that do not fit where they must.
struct GeometryError : Error {
    using Error::Error;
};

// Out-of-range parameters and contract violations at call sites.
struct InvalidArgument : Error {
    using Error::Error;
};

// Runtime checks that failed: diverged loss, failed self-verification.
struct ValidationError : Error {
    using Error::Error;
};

}  // namespace vseg
