/*
 * Copyright 2026 The fhe-fedsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace fhe_fedsim {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands disagree on degree, prime set, domain, level or shape.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A rescale or prime drop was requested with a single prime left.
class LevelExhaustedError : public Error {
 public:
  using Error::Error;
};

// More values than a plaintext can hold.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes on the wire or in a file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters. `field()` names the offending setting.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace fhe_fedsim
