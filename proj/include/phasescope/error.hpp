#pragma once

#include <stdexcept>
#include <string>

namespace phasescope {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad UTF-8, bad rows, inconsistent records).
class InputError : public Error {
 public:
  using Error::Error;
};

/// On-disk format problems: bad magic, version mismatch, truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (empty query, n < 1, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Statistic is undefined for the data: zero variance, zero vector.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix is rank deficient.
class SingularError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace phasescope
