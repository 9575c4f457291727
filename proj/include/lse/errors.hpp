#ifndef LSE_ERRORS_HPP
#define LSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lse {

/// Base class for every failure raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// An input violated a documented contract: bad dimensions, malformed file,
/// inconsistent manifest, out-of-range hyperparameter.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Filesystem-level failure; message always carries the offending path.
class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: factorization of a singular system, eigensolver
/// non-convergence.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace lse

#endif  // LSE_ERRORS_HPP
