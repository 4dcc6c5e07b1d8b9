#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridtrade {

// Base for every error raised by the library. Callers that only care about
// "something went wrong with the inputs" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (CSV rows, JSON documents). line() is 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SpacingError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class FeasibilityError : public Error {
public:
    using Error::Error;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

// Power flow left the region where the linearization is meaningful.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// A hard network limit cannot be met for the given injections.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::string constraint)
        : Error(what), constraint_(std::move(constraint)) {}
    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class EpisodeFinished : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

} // namespace gridtrade
