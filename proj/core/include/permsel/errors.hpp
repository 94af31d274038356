#pragma once

#include <stdexcept>
#include <string>

namespace permsel {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ExitCode::Usage, what) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::Data, what) {}
};

/// A numerical procedure could not produce a usable answer.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::Numerical, what) {}
};

}  // namespace permsel
