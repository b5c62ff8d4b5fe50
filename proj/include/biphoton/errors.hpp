#pragma once

#include <stdexcept>
#include <string>

namespace biphoton {

/// Invalid configuration or input data; CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure while running an otherwise valid job; CLI maps this to exit code 2.
class PipelineError : public std::runtime_error {
public:
    explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

/// Fit could not be performed (degenerate data, non-converged prerequisite).
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

/// File-level I/O failure (open/read/write).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally invalid file contents (magic, version).
class FormatError : public IoError {
public:
    explicit FormatError(const std::string& what) : IoError(what) {}
};

/// File ends before the declared payload.
class TruncationError : public IoError {
public:
    explicit TruncationError(const std::string& what) : IoError(what) {}
};

} // namespace biphoton
