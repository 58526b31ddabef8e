#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace parkmon {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sample stream is non-monotonic or has a gap; the detector must be reset.
class StreamDiscontinuity : public Error {
public:
    using Error::Error;
};

// Evaluation requested before the sample window is full.
class InsufficientData : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

}  // namespace parkmon
