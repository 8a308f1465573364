#pragma once

#include <stdexcept>
#include <string>

namespace parsvd {

// Every failure raised by the library derives from Error so callers can map
// categories to exit codes without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class DegenerateModeError : public Error {
public:
    DegenerateModeError(const std::string& what, std::size_t mode)
        : Error(what), mode_(mode) {}
    std::size_t mode() const noexcept { return mode_; }

private:
    std::size_t mode_;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class ConnectionError : public Error {
public:
    using Error::Error;
};

}  // namespace parsvd
