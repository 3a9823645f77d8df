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

#include "kgqe/execution.hpp"

#include <algorithm>
#include <istream>
#include <mutex>

#include "json.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

EntitySet AnswerList::as_set() const { return normalize(entities); }

EntitySet apply_set_operation(StepKind kind, std::span<const EntitySet> inputs) {
  switch (kind) {
    case StepKind::kIntersect: return set_intersection(inputs);
    case StepKind::kUnion: return set_union(inputs);
    case StepKind::kSubtract: return set_difference(inputs[0], inputs[1]);
    case StepKind::kProject: break;
  }
  throw Error("PROJECT is not a set operation");
}

AnswerList exact_answer_step(const Step& step, const KnowledgeGraph& graph,
                             std::span<const EntitySet> inputs) {
  AnswerList out;
  out.provenance = "exact";
  if (step.kind != StepKind::kProject) {
    out.entities = apply_set_operation(step.kind, inputs);
    return out;
  }
  EntitySet reached;
  for (auto source : inputs[0]) {
    auto next = graph.neighbors(source, *step.relation, Direction::kForward);
    reached.insert(reached.end(), next.begin(), next.end());
  }
  out.entities = normalize(std::move(reached));
  return out;
}

AnswerList evidence_answer_step(const Step& step, std::string_view evidence,
                                std::span<const EntitySet> inputs) {
  AnswerList out;
  out.provenance = "evidence";
  if (step.kind != StepKind::kProject) {
    out.entities = apply_set_operation(step.kind, inputs);
    return out;
  }
  EntitySet reached;
  for (const auto& t : parse_evidence_triples(evidence)) {
    if (t.relation == *step.relation && contains(inputs[0], t.head)) {
      reached.push_back(t.tail);
    }
  }
  out.entities = normalize(std::move(reached));
  return out;
}

AnswerList ExactAnswerer::answer_step(const StepRequest& request) {
  return exact_answer_step(request.step, graph_, request.inputs);
}

AnswerList EvidenceAnswerer::answer_step(const StepRequest& request) {
  if (request.evidence == nullptr) throw Error("evidence backend called without evidence");
  return evidence_answer_step(request.step, request.evidence->text, request.inputs);
}

ScriptedAnswerer ScriptedAnswerer::from_stream(std::istream& in) {
  std::map<std::string, std::string> outputs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), number);
    }
    if (!record.is_object() || !record.contains("signature") ||
        !record.contains("output") || !record["signature"].is_string() ||
        !record["output"].is_string()) {
      throw FormatError("script record needs string \"signature\" and \"output\"", number);
    }
    outputs[record["signature"].get<std::string>()] = record["output"].get<std::string>();
  }
  return ScriptedAnswerer(std::move(outputs));
}

AnswerList ScriptedAnswerer::answer_step(const StepRequest& request) {
  auto it = outputs_.find(request.signature);
  if (it == outputs_.end()) {
    throw ScriptError("no scripted output for signature " + request.signature);
  }
  auto parsed = parse_answer(it->second);
  AnswerList out;
  out.entities = std::move(parsed.entities);
  out.violations = parsed.violations;
  out.explicit_none = parsed.explicit_none;
  out.provenance = "scripted";
  return out;
}

std::optional<AnswerList> StepCache::find(const std::string& signature) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(signature);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

AnswerList StepCache::insert(const std::string& signature, AnswerList answer) {
  std::unique_lock lock(mutex_);
  return entries_.try_emplace(signature, std::move(answer)).first->second;
}

std::size_t StepCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

namespace {

struct PreparedStep {
  std::vector<EntitySet> inputs;
  // Every input is empty: the answer is empty without asking the backend.
  bool short_circuit = false;
  std::size_t evidence_triples = 0;
  bool truncated = false;
  std::optional<SerializedEvidence> evidence;
  std::optional<StepPrompt> prompt;
};

std::vector<EntitySet> resolve_inputs(const Step& step,
                                      const std::vector<EntitySet>& outputs) {
  std::vector<EntitySet> inputs;
  for (const auto& source : step.sources) {
    if (const auto* literal = std::get_if<EntitySet>(&source)) {
      inputs.push_back(normalize(*literal));
    } else {
      inputs.push_back(outputs.at(std::get<StepRef>(source).step));
    }
  }
  return inputs;
}

PreparedStep prepare(const Plan& plan, const Step& step,
                     const std::vector<EntitySet>& outputs, bool wants_evidence,
                     const KnowledgeGraph& observed, const ExecutionOptions& options) {
  PreparedStep prepared;
  prepared.inputs = resolve_inputs(step, outputs);
  EntitySet seeds;
  bool any_input = false;
  for (std::size_t i = 0; i < step.sources.size(); ++i) {
    const auto& input = prepared.inputs[i];
    any_input = any_input || !input.empty();
    const bool literal = std::holds_alternative<EntitySet>(step.sources[i]);
    const EntitySet part = literal ? input : reseed(input, options.retrieval);
    seeds.insert(seeds.end(), part.begin(), part.end());
  }
  if (!any_input) {
    prepared.short_circuit = true;
    return prepared;
  }
  if (!wants_evidence) return prepared;

  seeds = normalize(std::move(seeds));
  if (seeds.empty()) seeds = anchor_entities(plan, step.index);
  std::vector<RelationId> relations;
  if (step.relation) relations.push_back(*step.relation);
  EvidenceBundle bundle;
  try {
    bundle = retrieve(observed, seeds, relations, options.retrieval);
  } catch (const RetrievalError&) {
    prepared.short_circuit = true;
    return prepared;
  }
  prepared.evidence_triples = bundle.triples.size();
  prepared.truncated = bundle.truncated;
  prepared.evidence = serialize_evidence(bundle);

  Bindings bindings;
  for (const auto& source : step.sources) {
    if (const auto* ref = std::get_if<StepRef>(&source)) {
      bindings[ref->step] = outputs.at(ref->step);
    }
  }
  const PromptTemplate& tmpl =
      options.prompt_template ? *options.prompt_template : PromptTemplate::builtin();
  prepared.prompt = render_prompt(step, *prepared.evidence, bindings, tmpl);
  return prepared;
}

StepRequest make_request(const Step& step, const std::string& signature,
                         const PreparedStep& prepared, const Answerer& answerer) {
  StepRequest request{step, signature, prepared.inputs};
  if (answerer.consumes_evidence() && prepared.evidence) {
    request.evidence = &*prepared.evidence;
    request.prompt = &*prepared.prompt;
  }
  return request;
}

AnswerList empty_answer(std::string provenance) {
  AnswerList out;
  out.provenance = std::move(provenance);
  return out;
}

[[noreturn]] void fail_step(const std::exception& e, const Step& step,
                            ExecutionTrace partial) {
  throw ExecutionError("step " + std::to_string(step.index) + " (" +
                           std::string(to_string(step.kind)) + ") failed: " + e.what(),
                       step.index, std::move(partial));
}

}  // namespace

ExecutionResult execute_plan(const Plan& plan, Answerer& answerer,
                             const KnowledgeGraph& observed,
                             const ExecutionOptions& options) {
  options.retrieval.validate();
  const auto sigs = signatures(plan);
  std::vector<EntitySet> outputs(plan.steps.size());
  ExecutionResult result;

  for (const auto& step : plan.steps) {
    const auto start = Clock::now();
    TraceEntry entry;
    entry.step = step.index;
    entry.kind = step.kind;
    entry.signature = sigs[step.index];

    std::optional<AnswerList> hit;
    if (options.cache) hit = options.cache->find(entry.signature);
    if (hit) {
      entry.inputs = resolve_inputs(step, outputs);
      entry.output = std::move(*hit);
      entry.cache_hit = true;
    } else {
      auto prepared = prepare(plan, step, outputs, answerer.consumes_evidence(),
                              observed, options);
      entry.inputs = prepared.inputs;
      entry.evidence_triples = prepared.evidence_triples;
      entry.truncated = prepared.truncated;
      if (prepared.short_circuit) {
        entry.output = empty_answer(answerer.name());
      } else {
        try {
          entry.output = answerer.answer_step(
              make_request(step, entry.signature, prepared, answerer));
        } catch (const std::exception& e) {
          fail_step(e, step, std::move(result.trace));
        }
        entry.backend_called = true;
      }
      if (options.cache) entry.output = options.cache->insert(entry.signature, entry.output);
    }
    outputs[step.index] = entry.output.as_set();
    entry.wall = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
    result.trace.push_back(std::move(entry));
  }
  result.answer = result.trace.back().output;
  return result;
}

std::size_t ConsensusConfig::effective_threshold() const {
  return threshold == 0 ? agents / 2 + 1 : threshold;
}

void ConsensusConfig::validate() const {
  if (agents == 0) throw ConfigError("consensus needs at least one agent");
  if (threshold > agents) {
    throw ConfigError("consensus threshold " + std::to_string(threshold) +
                      " exceeds agent count " + std::to_string(agents));
  }
}

AnswerList aggregate_votes(std::span<const AnswerList> outputs, std::size_t threshold,
                           double* disagreement) {
  struct Tally {
    EntityId id;
    std::size_t votes = 0;
    std::size_t first = 0;
  };
  std::map<EntityId, Tally> tallies;
  AnswerList out;
  for (const auto& output : outputs) {
    out.violations += output.violations;
    for (std::size_t pos = 0; pos < output.entities.size(); ++pos) {
      auto [it, fresh] = tallies.try_emplace(output.entities[pos],
                                             Tally{output.entities[pos], 0, pos});
      ++it->second.votes;
      it->second.first = std::min(it->second.first, pos);
    }
  }
  std::vector<Tally> kept;
  std::size_t split_votes = 0;
  for (const auto& [id, tally] : tallies) {
    if (tally.votes < outputs.size()) ++split_votes;
    if (tally.votes >= threshold) kept.push_back(tally);
  }
  if (disagreement) {
    *disagreement = tallies.empty()
                        ? 0.0
                        : static_cast<double>(split_votes) / static_cast<double>(tallies.size());
  }
  std::sort(kept.begin(), kept.end(), [](const Tally& a, const Tally& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.first != b.first) return a.first < b.first;
    return a.id < b.id;
  });
  for (const auto& t : kept) out.entities.push_back(t.id);
  out.provenance = "consensus";
  if (!outputs.empty()) {
    out.provenance += "(" + std::to_string(outputs.size()) + "x" + outputs[0].provenance + ")";
  }
  out.explicit_none = out.entities.empty() &&
                      std::all_of(outputs.begin(), outputs.end(),
                                  [](const AnswerList& a) { return a.explicit_none; });
  return out;
}

namespace {

ConsensusResult consensus_final_only(const Plan& plan, const AnswererFactory& factory,
                                     const ConsensusConfig& consensus,
                                     const KnowledgeGraph& observed,
                                     const ExecutionOptions& options) {
  ConsensusResult result;
  for (std::size_t agent = 0; agent < consensus.agents; ++agent) {
    auto answerer = factory(agent);
    // Independent pipelines must not share cached steps.
    StepCache local;
    ExecutionOptions own = options;
    own.cache = options.cache ? &local : nullptr;
    result.agent_traces.push_back(execute_plan(plan, *answerer, observed, own).trace);
  }
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    std::vector<AnswerList> votes;
    for (const auto& trace : result.agent_traces) votes.push_back(trace[i].output);
    TraceEntry entry = result.agent_traces.front()[i];
    entry.output = aggregate_votes(votes, consensus.effective_threshold(), &entry.disagreement);
    result.trace.push_back(std::move(entry));
  }
  result.answer = result.trace.back().output;
  return result;
}

}  // namespace

ConsensusResult consensus_execute(const Plan& plan, const AnswererFactory& factory,
                                  const ConsensusConfig& consensus,
                                  const KnowledgeGraph& observed,
                                  const ExecutionOptions& options) {
  consensus.validate();
  options.retrieval.validate();
  if (consensus.mode == ConsensusConfig::Mode::kFinalOnly) {
    return consensus_final_only(plan, factory, consensus, observed, options);
  }

  std::vector<std::unique_ptr<Answerer>> agents;
  bool wants_evidence = false;
  for (std::size_t i = 0; i < consensus.agents; ++i) {
    agents.push_back(factory(i));
    wants_evidence = wants_evidence || agents.back()->consumes_evidence();
  }
  const auto sigs = signatures(plan);
  std::vector<EntitySet> outputs(plan.steps.size());
  ConsensusResult result;
  result.agent_traces.resize(agents.size());

  for (const auto& step : plan.steps) {
    const auto start = Clock::now();
    TraceEntry entry;
    entry.step = step.index;
    entry.kind = step.kind;
    entry.signature = sigs[step.index];
    std::vector<TraceEntry> per_agent(agents.size());

    std::optional<AnswerList> hit;
    if (options.cache) hit = options.cache->find(entry.signature);
    if (hit) {
      entry.inputs = resolve_inputs(step, outputs);
      entry.output = std::move(*hit);
      entry.cache_hit = true;
      for (auto& a : per_agent) a = entry;
    } else {
      auto prepared = prepare(plan, step, outputs, wants_evidence, observed, options);
      entry.inputs = prepared.inputs;
      entry.evidence_triples = prepared.evidence_triples;
      entry.truncated = prepared.truncated;
      std::vector<AnswerList> votes;
      for (std::size_t k = 0; k < agents.size(); ++k) {
        per_agent[k] = entry;
        if (prepared.short_circuit) {
          per_agent[k].output = empty_answer(agents[k]->name());
        } else {
          try {
            per_agent[k].output = agents[k]->answer_step(
                make_request(step, entry.signature, prepared, *agents[k]));
          } catch (const std::exception& e) {
            fail_step(e, step, std::move(result.trace));
          }
          per_agent[k].backend_called = true;
        }
        votes.push_back(per_agent[k].output);
      }
      entry.output = aggregate_votes(votes, consensus.effective_threshold(), &entry.disagreement);
      entry.backend_called = !prepared.short_circuit;
      if (options.cache) entry.output = options.cache->insert(entry.signature, entry.output);
    }
    outputs[step.index] = entry.output.as_set();
    entry.wall = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
    for (std::size_t k = 0; k < agents.size(); ++k) {
      result.agent_traces[k].push_back(std::move(per_agent[k]));
    }
    result.trace.push_back(std::move(entry));
  }
  result.answer = result.trace.back().output;
  return result;
}

std::string trace_records(std::string_view query_id, const ExecutionTrace& trace,
                          bool timing) {
  std::string out;
  for (const auto& entry : trace) {
    json inputs = json::array();
    for (const auto& input : entry.inputs) inputs.push_back(labels(input));
    json record = {{"query", std::string(query_id)},
                   {"step", entry.step},
                   {"kind", std::string(to_string(entry.kind))},
                   {"signature", entry.signature},
                   {"evidence_triples", entry.evidence_triples},
                   {"truncated", entry.truncated},
                   {"inputs", inputs},
                   {"output", labels(entry.output.entities)},
                   {"provenance", entry.output.provenance},
                   {"violations", entry.output.violations},
                   {"explicit_none", entry.output.explicit_none},
                   {"cache_hit", entry.cache_hit},
                   {"backend_called", entry.backend_called},
                   {"disagreement", entry.disagreement}};
    if (timing) record["wall_us"] = entry.wall.count();
    out += record.dump() + "\n";
  }
  return out;
}

}  // namespace kgqe
