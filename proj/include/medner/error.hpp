// Copyright 2026 The medner Authors.
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
#include <utility>

namespace medner {

// Base of every error the library raises. The kind() string is stable and is
// used by the CLI and the HTTP layer to classify failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// Caller-supplied values violate a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

// Malformed or truncated input file / record.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

// Annotation data that does not satisfy the span/token invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class NotFound : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "not_found"; }
};

// Optimistic-concurrency or lifecycle conflict. `code` narrows the kind for
// API clients ("revision_conflict", "no_model", ...).
class Conflict : public Error {
 public:
  explicit Conflict(const std::string& message, std::string code = "conflict")
      : Error(message), code_(std::move(code)) {}
  const char* kind() const noexcept override { return "conflict"; }
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace medner
