#pragma once

#include <stdexcept>
#include <string>

namespace stickernet {

// Caller passed something that violates an operation's preconditions.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operation invoked in the wrong state (e.g. backward without a forward cache).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Dataset or file contents are missing, malformed or inconsistent.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values appeared during training or inference.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stickernet
