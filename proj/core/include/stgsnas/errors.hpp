// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stgsnas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Training produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: files, datasets, splits.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A byte stream could not be decoded. Carries the offending byte offset.
class ParseError : public DataError {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : DataError("parse error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

/// Declared feature dimensions disagree with the stored payload or with
/// what the caller expects.
class FeatureShapeError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace stgsnas
