#pragma once

#include <stdexcept>
#include <string>

namespace specprune {

// Base class for everything this library throws on purpose. The CLI maps any
// Error to a nonzero exit code with the message on stderr.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/matrix dimensions do not line up. Messages name both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite numbers are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// All-zero spectrum: no state vector can be formed.
class DegenerateSignatureError : public Error {
 public:
  using Error::Error;
};

// All-zero weight tensor fed to the random-feature embedding.
class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

// Out-of-range scalar argument (rank, radius, eps, sparsity, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration: unknown strategy tag, missing cost entry, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Name does not resolve (operator, tensor key, cluster id).
class LookupError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Container/manifest/document cannot be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Parsed fine but internally inconsistent (overlapping ranges, missing ops).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDtypeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace specprune
