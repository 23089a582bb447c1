#pragma once

#include <stdexcept>
#include <string>

namespace dph {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value; the message names the violated bound.
class ConfigError : public Error {
public:
  using Error::Error;
};

// A file could not be parsed; the message carries the line or record index.
class ParseError : public Error {
public:
  using Error::Error;
};

// A parsed value violates a data-model invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Dimension mismatch between an input and the expected shape.
class ShapeError : public Error {
public:
  using Error::Error;
};

// A label lies outside its admissible set.
class LabelError : public Error {
public:
  using Error::Error;
};

// A retrieval query is malformed or violates a task precondition.
class QueryError : public Error {
public:
  using Error::Error;
};

// File-level I/O failure (bad magic, truncation, unwritable path).
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace dph
