// Copyright 2026 The FedCL Authors. All Rights Reserved.
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

namespace fedcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter is outside its documented range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation needs data that is not there (empty dataset, no updates, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// SMOTE was asked to grow a class it cannot interpolate.
class InsufficientSamplesError : public DataError {
 public:
  using DataError::DataError;
};

/// Continual-learning state does not match the configured strategy.
class StrategyStateError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedcl
