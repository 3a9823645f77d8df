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

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgqe/error.hpp"
#include "kgqe/evidence.hpp"
#include "kgqe/graph.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/retriever.hpp"

namespace kgqe {

// Ordered, duplicate-free candidates for one step. Order is the ranking used
// by evaluation.
struct AnswerList {
  std::vector<EntityId> entities;
  std::string provenance;
  std::size_t violations = 0;
  bool explicit_none = false;

  EntitySet as_set() const;
};

struct StepRequest {
  const Step& step;
  const std::string& signature;
  // Resolved argument sets, parallel to step.sources.
  std::span<const EntitySet> inputs;
  // Set only for backends that consume evidence.
  const SerializedEvidence* evidence = nullptr;
  const StepPrompt* prompt = nullptr;
};

class Answerer {
 public:
  virtual ~Answerer() = default;

  virtual std::string name() const = 0;
  virtual bool consumes_evidence() const = 0;
  virtual AnswerList answer_step(const StepRequest& request) = 0;
};

// INTERSECT, UNION and SUBTRACT over resolved inputs.
EntitySet apply_set_operation(StepKind kind, std::span<const EntitySet> inputs);

// Reference operator semantics over the adjacency indexes; ignores evidence.
AnswerList exact_answer_step(const Step& step, const KnowledgeGraph& graph,
                             std::span<const EntitySet> inputs);

// Same semantics, but PROJECT may only follow triples listed in the evidence.
AnswerList evidence_answer_step(const Step& step, std::string_view evidence,
                                std::span<const EntitySet> inputs);

class ExactAnswerer final : public Answerer {
 public:
  explicit ExactAnswerer(const KnowledgeGraph& graph) : graph_(graph) {}

  std::string name() const override { return "exact"; }
  bool consumes_evidence() const override { return false; }
  AnswerList answer_step(const StepRequest& request) override;

 private:
  const KnowledgeGraph& graph_;
};

class EvidenceAnswerer final : public Answerer {
 public:
  std::string name() const override { return "evidence"; }
  bool consumes_evidence() const override { return true; }
  AnswerList answer_step(const StepRequest& request) override;
};

// Replays canned model outputs keyed by step signature.
class ScriptedAnswerer final : public Answerer {
 public:
  explicit ScriptedAnswerer(std::map<std::string, std::string> outputs)
      : outputs_(std::move(outputs)) {}

  // One {"signature": ..., "output": ...} object per line.
  static ScriptedAnswerer from_stream(std::istream& in);

  std::string name() const override { return "scripted"; }
  bool consumes_evidence() const override { return true; }
  // Throws ScriptError for an unknown signature.
  AnswerList answer_step(const StepRequest& request) override;

 private:
  std::map<std::string, std::string> outputs_;
};

// Signature -> answer. Concurrent readers; the first insert for a signature
// wins and later inserts return the stored value.
class StepCache {
 public:
  std::optional<AnswerList> find(const std::string& signature) const;
  AnswerList insert(const std::string& signature, AnswerList answer);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, AnswerList> entries_;
};

struct TraceEntry {
  std::size_t step = 0;
  StepKind kind = StepKind::kProject;
  std::string signature;
  std::size_t evidence_triples = 0;
  bool truncated = false;
  std::vector<EntitySet> inputs;
  AnswerList output;
  bool cache_hit = false;
  bool backend_called = false;
  // Fraction of voted candidates without a unanimous vote; consensus only.
  double disagreement = 0.0;
  std::chrono::microseconds wall{0};
};

using ExecutionTrace = std::vector<TraceEntry>;

// Carries the steps completed before the failure.
class ExecutionError : public Error {
 public:
  ExecutionError(const std::string& what, std::size_t step, ExecutionTrace partial)
      : Error(what), step_(step), partial_(std::move(partial)) {}

  std::size_t step() const { return step_; }
  const ExecutionTrace& partial_trace() const { return partial_; }

 private:
  std::size_t step_;
  ExecutionTrace partial_;
};

struct ExecutionOptions {
  RetrievalConfig retrieval;
  const PromptTemplate* prompt_template = nullptr;  // null: built-in
  StepCache* cache = nullptr;                        // null: no caching
};

struct ExecutionResult {
  AnswerList answer;
  ExecutionTrace trace;
};

// Runs the steps in plan order. Evidence is retrieved from `observed`.
ExecutionResult execute_plan(const Plan& plan, Answerer& answerer,
                             const KnowledgeGraph& observed,
                             const ExecutionOptions& options);

struct ConsensusConfig {
  enum class Mode { kPerStep, kFinalOnly };

  std::size_t agents = 1;
  // Minimum votes for inclusion; 0 selects a strict majority.
  std::size_t threshold = 0;
  Mode mode = Mode::kPerStep;

  std::size_t effective_threshold() const;
  void validate() const;
};

// Votes over agent outputs. Entities with at least `threshold` votes are
// kept, ordered by (votes desc, earliest position in any agent's list, id).
AnswerList aggregate_votes(std::span<const AnswerList> outputs, std::size_t threshold,
                           double* disagreement = nullptr);

using AnswererFactory = std::function<std::unique_ptr<Answerer>(std::size_t agent)>;

struct ConsensusResult {
  AnswerList answer;
  ExecutionTrace trace;  // aggregated, one entry per step
  std::vector<ExecutionTrace> agent_traces;
};

// Per-step mode aggregates each step and feeds the agreed set to every agent.
// Final-only mode runs independent pipelines and votes per step without
// propagating.
ConsensusResult consensus_execute(const Plan& plan, const AnswererFactory& factory,
                                  const ConsensusConfig& consensus,
                                  const KnowledgeGraph& observed,
                                  const ExecutionOptions& options);

// One JSON object per step. Wall time is omitted unless `timing` is set so
// trace files stay byte-stable across runs.
std::string trace_records(std::string_view query_id, const ExecutionTrace& trace,
                          bool timing = false);

}  // namespace kgqe
