/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef POTQ_ERRORS_H_
#define POTQ_ERRORS_H_

#include <stdexcept>
#include <string>

namespace potq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or layer geometry do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values (empty tensors, labels out of range, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong state (backward twice, uncalibrated model).
class StateError : public Error {
 public:
  using Error::Error;
};

// Bad or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corrupt or unsupported binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training diverged. Carries the zero-based epoch index.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace potq

#endif  // POTQ_ERRORS_H_
