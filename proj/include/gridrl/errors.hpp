#pragma once

#include <stdexcept>
#include <string>

namespace gridrl {

// Error taxonomy mirrors the C API status codes (gridrl.h) and the CLI
// exit codes: config=2, numerical=3, resume-mismatch=4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct GenerationError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct RemoteError : Error {
    using Error::Error;
};

struct ResumeMismatchError : Error {
    using Error::Error;
};

}  // namespace gridrl
