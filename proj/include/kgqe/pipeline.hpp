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

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kgqe/config.hpp"
#include "kgqe/eval.hpp"
#include "kgqe/execution.hpp"
#include "kgqe/graph.hpp"
#include "kgqe/query.hpp"

namespace kgqe {

// Reads the configured triple files. Throws ConfigError for missing paths and
// FormatError (with file and line) for malformed content.
GraphSplit load_split(const RunConfig& config);

std::vector<QueryInstance> load_queries(const RunConfig& config, bool with_answers);

std::vector<QueryInstance> generate_all(const GraphSplit& split, const RunConfig& config);

// Builds one backend per call; the returned factory is safe to call from
// several threads. Checks backend prerequisites (script file, endpoint)
// eagerly.
AnswererFactory make_answerer_factory(const RunConfig& config, const GraphSplit& split);

struct QueryOutcome {
  std::string id;
  QueryType type = QueryType::k1p;
  bool ok = false;
  std::string error;
  AnswerList answer;
  ExecutionTrace trace;
};

struct BatchResult {
  std::vector<QueryOutcome> outcomes;  // input order
  std::size_t failed = 0;
};

// Compiles and executes every instance. Failures are recorded per query and
// never stop the batch. The step cache is shared by all queries.
BatchResult run_batch(const std::vector<QueryInstance>& instances, const GraphSplit& split,
                      const RunConfig& config);

// {"answers","error","id","status","type","violations"} per query.
std::string raw_answer_records(const BatchResult& batch);
std::string batch_trace_records(const BatchResult& batch, bool timing);

struct RawAnswer {
  std::string id;
  bool ok = false;
  std::vector<EntityId> answers;
};

std::vector<RawAnswer> read_raw_answers(std::istream& in);

// Joins raw answers with instances by id; throws EvalError when the id sets
// differ. Failed queries contribute absent records.
MrrReport evaluate(const std::vector<QueryInstance>& instances,
                   const std::vector<RawAnswer>& answers, const RunConfig& config,
                   std::size_t entity_count);

}  // namespace kgqe
