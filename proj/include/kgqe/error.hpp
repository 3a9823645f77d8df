/*
 * Copyright 2026 The kgqe Authors.
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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace kgqe {

// Base of every error thrown by the library. Subclasses carry the context a
// caller needs to decide policy (line numbers, step indexes, counts).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: triple files, query/answer records, scripts.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what,
                       std::optional<std::size_t> line = std::nullopt)
      : Error(line ? "line " + std::to_string(*line) + ": " + what : what),
        line_(line) {}

  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> line_;
};

// Unknown surface string, unknown label, or id outside the graph's range.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Query structure violates the AST invariants or matches no template.
class QueryError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, std::size_t produced)
      : Error(what), produced_(produced) {}

  std::size_t produced() const { return produced_; }

 private:
  std::size_t produced_;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

class PromptError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failure talking to a remote answerer, or a malformed response envelope.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::size_t step)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ScriptError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgqe
