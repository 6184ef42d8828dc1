#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rubricrl {

// Base of every exception thrown by the library. Callers that only care
// about "did it work" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (beta <= 0,
// reward outside [0,1], c outside (0,1)).
class DomainError : public Error {
public:
    using Error::Error;
};

// Quadrature or other numerical procedure failed to converge.
class NumericError : public Error {
public:
    using Error::Error;
};

// The operation needs an invertible, measure-preserving map.
class UnsupportedMapError : public Error {
public:
    using Error::Error;
};

// Verdict key set does not match the rubric's criterion ids.
class GradingMismatchError : public Error {
public:
    GradingMismatchError(const std::string& what, std::vector<std::string> missing,
                         std::vector<std::string> extra)
        : Error(what), missing_(std::move(missing)), extra_(std::move(extra)) {}

    const std::vector<std::string>& missing() const { return missing_; }
    const std::vector<std::string>& extra() const { return extra_; }

private:
    std::vector<std::string> missing_;
    std::vector<std::string> extra_;
};

// Voting / pairing protocol violated (even vote count, length mismatch,
// empty evaluation set).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class InvalidRubricError : public Error {
public:
    using Error::Error;
};

class PoolTooSmallError : public Error {
public:
    using Error::Error;
};

// Rubric refinement could not produce a new rubric. Carries the last raw
// proposer reply when one exists.
class RefinementFailedError : public Error {
public:
    RefinementFailedError(const std::string& what, std::string raw_reply = {})
        : Error(what), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const { return raw_reply_; }

private:
    std::string raw_reply_;
};

// Model reply could not be turned into the expected structure.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw_reply = {})
        : Error(what), raw_reply_(std::move(raw_reply)) {}

    const std::string& raw_reply() const { return raw_reply_; }

private:
    std::string raw_reply_;
};

// No balanced JSON span in a model reply, or the span failed to parse.
// Offsets are byte positions in the raw reply.
class ExtractionError : public ParseError {
public:
    ExtractionError(const std::string& what, std::string raw_reply, std::size_t begin,
                    std::size_t end)
        : ParseError(what, std::move(raw_reply)), begin_(begin), end_(end) {}

    std::size_t begin_offset() const { return begin_; }
    std::size_t end_offset() const { return end_; }

private:
    std::size_t begin_;
    std::size_t end_;
};

class JudgeParseError : public ParseError {
public:
    using ParseError::ParseError;
};

// Transport-level failure talking to a chat backend.
class BackendError : public Error {
public:
    using Error::Error;
};

// Malformed or dangling input files.
class InputError : public Error {
public:
    using Error::Error;
};

} // namespace rubricrl
