// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   errors.hpp
 * @brief  Exception hierarchy shared by every hallmark module.
 *
 * Each family maps onto one CLI exit code: ConfigError -> 2,
 * DataError -> 3, NumericError -> 4. ShapeError is a logic error raised by
 * tensor ops; it is reported as a numeric failure by the CLI.
 */
#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hallmark {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class DataError : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Raised when a checkpoint cannot be read back; subclasses name the cause.
class CheckpointError : public DataError {
public:
  using DataError::DataError;
};

class VersionMismatchError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class ChecksumError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class MissingTensorError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

class TensorShapeMismatchError : public CheckpointError {
public:
  using CheckpointError::CheckpointError;
};

inline std::string shape_str(const std::vector<std::size_t> &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

} // namespace hallmark
