#pragma once

#include <stdexcept>
#include <string>

namespace covq {

// Base for all library errors so callers can catch covq failures in one place.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MapParseError : Error {
    enum class Kind { NonRectangular, UnknownCell, NoStart, StartNotCharging, MultipleStarts };
    MapParseError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
    Kind kind;
};

struct MaskedActionError : Error {
    using Error::Error;
};

struct SteppedAfterDoneError : Error {
    using Error::Error;
};

struct AllMaskedError : Error {
    using Error::Error;
};

struct ShapeMismatchError : Error {
    using Error::Error;
};

struct InsufficientSamplesError : Error {
    using Error::Error;
};

struct IndexOutOfRangeError : Error {
    using Error::Error;
};

struct InstanceTooLargeError : Error {
    using Error::Error;
};

struct ToleranceExceededError : Error {
    using Error::Error;
};

struct ChecksumMismatchError : Error {
    using Error::Error;
};

struct VariantMismatchError : Error {
    using Error::Error;
};

struct GenerationFailedError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    ConfigError(const std::string& msg, int line_no = 0) : Error(msg), line(line_no) {}
    int line;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace covq
