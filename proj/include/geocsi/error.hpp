#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geocsi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed scene file. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NonCoplanarPlane : public Error {
public:
    NonCoplanarPlane(std::size_t plane_index, double deviation)
        : Error("plane " + std::to_string(plane_index) + " is not coplanar (max deviation " +
                std::to_string(deviation) + " m)"),
          plane_index_(plane_index), deviation_(deviation) {}
    std::size_t plane_index() const noexcept { return plane_index_; }
    double deviation() const noexcept { return deviation_; }

private:
    std::size_t plane_index_;
    double deviation_;
};

/// A partition whose validity indices have a zero denominator.
class DegeneratePartition : public Error {
public:
    using Error::Error;
};

/// Effective channel too ill-conditioned for zero-forcing.
class IllConditioned : public Error {
public:
    IllConditioned(double condition_number)
        : Error("effective channel is ill-conditioned (condition number " +
                std::to_string(condition_number) + ")"),
          condition_number_(condition_number) {}
    double condition_number() const noexcept { return condition_number_; }

private:
    double condition_number_;
};

/// A pipeline stage was asked to run before its inputs exist or are current.
class DependencyError : public Error {
public:
    using Error::Error;
};

}  // namespace geocsi
