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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kgqe/eval.hpp"
#include "kgqe/execution.hpp"
#include "kgqe/llm.hpp"
#include "kgqe/query.hpp"
#include "kgqe/retriever.hpp"

namespace kgqe {

enum class Backend { kExact, kEvidence, kLlm, kScripted };

std::string_view to_string(Backend backend);

// Everything a batch run needs. Loaded from a flat key=value file; every key
// can also be set individually (command-line flags), later sets winning.
struct RunConfig {
  struct Key {
    std::string_view name;
    std::string_view help;
  };

  std::string dataset = "dataset";
  std::string model;  // report row label; empty uses the backend name

  // Observed = train (+ valid when observed_includes_valid); full = all.
  std::filesystem::path train_triples;
  std::filesystem::path valid_triples;
  std::filesystem::path test_triples;
  bool observed_includes_valid = false;

  std::filesystem::path queries;
  std::filesystem::path answers;
  std::filesystem::path output_dir = ".";

  std::vector<QueryType> types{kAllQueryTypes.begin(), kAllQueryTypes.end()};
  std::size_t count_per_type = 10;
  std::uint64_t seed = 0;
  std::size_t retry_factor = 100;

  RetrievalConfig retrieval;

  Backend backend = Backend::kExact;
  // Graph the exact backend answers over: "full" or "observed".
  bool exact_over_full = true;
  std::filesystem::path script;
  TransportConfig transport;

  ConsensusConfig consensus;
  AbsentPolicy absent_policy = AbsentPolicy::kZero;

  std::size_t workers = 1;
  bool cache = true;
  std::filesystem::path prompt_template;
  bool trace_timing = false;

  static const std::vector<Key>& keys();

  // Throws ConfigError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  // Lines "key = value"; '#' starts a comment line. Throws ConfigError with
  // the offending line number.
  void load_text(std::string_view text, std::string_view source);
  void load_file(const std::filesystem::path& path);

  // Numeric bounds and backend prerequisites.
  void validate() const;
  std::string report_model() const;
};

}  // namespace kgqe
