#pragma once

#include <stdexcept>
#include <string>

namespace trackmine {

// Bad invocation: missing flags, inconsistent parameters. CLI exit code 1.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data: malformed files, range violations, mismatched ids. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trackmine
