#pragma once

#include <stdexcept>
#include <string>

namespace gamepred {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input file: carries the source location of the offending record.
struct ParseError : Error {
    ParseError(const std::string& file, long line, const std::string& what_arg)
        : Error(file + ":" + std::to_string(line) + ": " + what_arg), file(file), line(line) {}
    std::string file;
    long line = 0;
};

// A record or object violates its schema/invariants.
struct SchemaError : Error {
    using Error::Error;
};

// Bad run configuration (missing paths, overlapping aliases, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Network failure that persisted through the retry budget.
struct TransportError : Error {
    TransportError(const std::string& what_arg, int attempts)
        : Error(what_arg + " (after " + std::to_string(attempts) + " attempts)"), attempts(attempts) {}
    int attempts = 0;
};

// Endpoint reachable but cannot serve the request (e.g. no logprob support).
struct CapabilityError : Error {
    using Error::Error;
};

// Non-success HTTP status from the inference endpoint.
struct HttpError : Error {
    HttpError(const std::string& what_arg, int status)
        : Error(what_arg + " (HTTP " + std::to_string(status) + ")"), status(status) {}
    int status = 0;
};

// 2x2 game whose equilibrium selection rule has no unique answer.
struct DegenerateGameError : Error {
    using Error::Error;
};

// Evaluation requested over predictions that were never produced.
struct MissingDataError : Error {
    using Error::Error;
};

} // namespace gamepred
