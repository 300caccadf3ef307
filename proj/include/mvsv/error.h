// Copyright (c) 2026 mvsv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVSV_ERROR_H_
#define MVSV_ERROR_H_

#include <stdexcept>
#include <string>

namespace mvsv {

// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / rank mismatch, empty sequences, bad op arguments.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value or unknown config key. CLI exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Unreadable / corrupt / truncated data files. CLI exit code 3.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// A requested test condition the given topology cannot serve. CLI exit code 4.
class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& msg) : Error(msg) {}
};

// Non-finite loss or other numerical abort during training. CLI exit code 5.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace mvsv

#endif  // MVSV_ERROR_H_
