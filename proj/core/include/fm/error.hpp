#pragma once

#include <stdexcept>
#include <string>

namespace fm {

// Every failure surfaced by the library derives from fm::Error so callers
// (notably the CLI) can map error families onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed array-file header (magic, version, dtype, ordering, shape).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed container holding unusable values (NaN, too few rows, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Cross-object consistency failures (manifest vs matrix, schema).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input (all-zero spectrum, zero steering direction).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage was requested before the stage it depends on.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class PlotError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void throw_io(const std::string& what, const std::string& path);

}  // namespace fm
