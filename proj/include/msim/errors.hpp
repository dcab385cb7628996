// Copyright 2026 The msim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace msim {

/// Base class for every error raised by the library. `exit_code()` is the
/// process exit code the CLI maps the error onto.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Configuration and contract violations (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ContractError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Data and shape problems (exit 3).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateVectorError : public DataError {
 public:
  using DataError::DataError;
};

class EmptySentenceError : public DataError {
 public:
  using DataError::DataError;
};

class VocabularyError : public DataError {
 public:
  using DataError::DataError;
};

class LexiconError : public DataError {
 public:
  using DataError::DataError;
};

class CorruptCheckpointError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss or gradient during optimization (exit 4).
class DivergenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace msim
