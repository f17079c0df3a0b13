#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evergreen {

/// Base of every error the library throws. `exit_code()` maps onto the CLI
/// convention: 2 config, 3 data, 4 numerical.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int exit_code() const noexcept override { return 3; }
    /// 1-based input line, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace evergreen
