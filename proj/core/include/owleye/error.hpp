#pragma once

#include <stdexcept>
#include <string>

namespace owleye {

/// Base class for all owleye errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (bad shape, empty input, out-of-range value).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// On-disk data does not match the documented format. Messages carry the
/// offending location (line number or byte offset).
class FormatError : public Error {
public:
  using Error::Error;
};

/// A computation produced or encountered a non-finite value.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Filesystem-level failure; message names the path.
class IoError : public Error {
public:
  using Error::Error;
};

/// Bad key or value in a run configuration.
class ConfigError : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace owleye
