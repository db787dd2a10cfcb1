#pragma once

#include <stdexcept>
#include <string>

namespace nutty {

/// Malformed input text (JSON, CSV, program files).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Animation program rejected at compile time. The message carries the
/// layer/block location.
class CompileError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Operation invoked on an object in the wrong state.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace nutty
