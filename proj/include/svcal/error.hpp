// Copyright 2026  The svcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace svcal {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the offending line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string &path, std::size_t line, const std::string &what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Data violates an invariant (dimension mismatch, duplicate id, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure failed to reach its tolerance or diverged.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace svcal
