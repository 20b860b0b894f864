#pragma once

#include <stdexcept>
#include <string>

namespace salsa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that cannot be combined by an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value outside an operation's mathematical domain (log of 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad or empty input data (corpora, sentence sets).
class InputError : public Error {
 public:
  using Error::Error;
};

class DegenerateMatrixError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible serialized file.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite during training.
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

} // namespace salsa
