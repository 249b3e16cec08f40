#pragma once

#include <stdexcept>
#include <string>

namespace shadeprint {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data (files, parameters, preconditions).
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to produce a usable answer.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace shadeprint
