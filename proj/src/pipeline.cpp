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

#include "kgqe/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "kgqe/error.hpp"
#include "kgqe/llm.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

using json = nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::string_view what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is not configured");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + std::string(what) + " " + path.string());
  return in;
}

std::vector<RawTriple> read_triples_file(const std::filesystem::path& path,
                                         std::string_view what) {
  auto in = open_input(path, what);
  return read_raw_triples(in, path.string());
}

}  // namespace

GraphSplit load_split(const RunConfig& config) {
  auto observed = read_triples_file(config.train_triples, "train triples");
  std::vector<RawTriple> held_out;
  if (!config.valid_triples.empty()) {
    auto valid = read_triples_file(config.valid_triples, "valid triples");
    auto& target = config.observed_includes_valid ? observed : held_out;
    target.insert(target.end(), valid.begin(), valid.end());
  }
  if (!config.test_triples.empty()) {
    auto test = read_triples_file(config.test_triples, "test triples");
    held_out.insert(held_out.end(), test.begin(), test.end());
  }
  if (observed.empty() && held_out.empty()) {
    throw FormatError(config.train_triples.string() + ": no triples");
  }
  return build_split(observed, held_out);
}

std::vector<QueryInstance> load_queries(const RunConfig& config, bool with_answers) {
  auto in = open_input(config.queries, "query file");
  auto instances = read_query_file(in);
  if (with_answers) {
    auto answers = open_input(config.answers, "answer file");
    read_answer_file(answers, instances);
  }
  return instances;
}

std::vector<QueryInstance> generate_all(const GraphSplit& split, const RunConfig& config) {
  std::vector<QueryInstance> out;
  for (std::size_t i = 0; i < config.types.size(); ++i) {
    GenerationOptions options;
    // Distinct, reproducible stream per type.
    options.seed = config.seed * 1000003ULL + i;
    options.retry_factor = config.retry_factor;
    auto batch = generate_instances(split, config.types[i], config.count_per_type, options);
    out.insert(out.end(), std::make_move_iterator(batch.begin()),
               std::make_move_iterator(batch.end()));
  }
  return out;
}

AnswererFactory make_answerer_factory(const RunConfig& config, const GraphSplit& split) {
  switch (config.backend) {
    case Backend::kExact: {
      const KnowledgeGraph* graph = config.exact_over_full ? &split.full : &split.observed;
      return [graph](std::size_t) { return std::make_unique<ExactAnswerer>(*graph); };
    }
    case Backend::kEvidence:
      return [](std::size_t) { return std::make_unique<EvidenceAnswerer>(); };
    case Backend::kScripted: {
      auto in = open_input(config.script, "script");
      auto script = std::make_shared<const ScriptedAnswerer>(ScriptedAnswerer::from_stream(in));
      return [script](std::size_t) { return std::make_unique<ScriptedAnswerer>(*script); };
    }
    case Backend::kLlm: {
      TransportConfig transport = config.transport;
      transport.apply_environment();
      transport.validate();
      auto limiter = std::make_shared<RequestLimiter>(transport.max_in_flight);
      std::size_t entities = split.full.entity_count();
      return [transport, limiter, entities](std::size_t) {
        return std::make_unique<RemoteLlmAnswerer>(transport, entities, limiter);
      };
    }
  }
  throw ConfigError("unknown backend");
}

namespace {

// Under concurrency, which query computes a shared step and which one hits
// the cache depends on scheduling. Rewrite the per-step flags as a serial run
// in input order would record them, so traces do not depend on the worker
// count. Outputs need no change since the cache keeps the first write.
void serialize_cache_flags(BatchResult& batch) {
  std::map<std::string, const TraceEntry*> computed;
  for (const auto& outcome : batch.outcomes) {
    for (const auto& entry : outcome.trace) {
      if (!entry.cache_hit) computed.emplace(entry.signature, &entry);
    }
  }
  std::map<std::string, TraceEntry> owners;
  for (const auto& [sig, entry] : computed) owners.emplace(sig, *entry);
  std::set<std::string> seen;
  for (auto& outcome : batch.outcomes) {
    for (auto& entry : outcome.trace) {
      if (!seen.insert(entry.signature).second) {
        entry.cache_hit = true;
        entry.backend_called = false;
        entry.evidence_triples = 0;
        entry.truncated = false;
        entry.disagreement = 0.0;
        continue;
      }
      auto it = owners.find(entry.signature);
      if (it == owners.end()) continue;
      entry.cache_hit = false;
      entry.backend_called = it->second.backend_called;
      entry.evidence_triples = it->second.evidence_triples;
      entry.truncated = it->second.truncated;
      entry.disagreement = it->second.disagreement;
    }
  }
}

}  // namespace

BatchResult run_batch(const std::vector<QueryInstance>& instances, const GraphSplit& split,
                      const RunConfig& config) {
  config.validate();
  AnswererFactory factory = make_answerer_factory(config, split);

  std::optional<PromptTemplate> custom_template;
  if (!config.prompt_template.empty()) {
    auto in = open_input(config.prompt_template, "prompt template");
    std::stringstream buffer;
    buffer << in.rdbuf();
    custom_template = PromptTemplate::parse(buffer.str());
  }

  StepCache cache;
  ExecutionOptions options;
  options.retrieval = config.retrieval;
  options.prompt_template = custom_template ? &*custom_template : nullptr;
  options.cache = config.cache ? &cache : nullptr;

  BatchResult batch;
  batch.outcomes.resize(instances.size());
  std::atomic<std::size_t> next{0};

  auto work = [&](std::size_t worker) {
    std::unique_ptr<Answerer> answerer;
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      const auto& instance = instances[i];
      auto& outcome = batch.outcomes[i];
      outcome.id = instance.id;
      outcome.type = instance.type;
      try {
        check_ids(instance.query, split.full);
        Plan plan = compile(instance.query);
        if (config.consensus.agents > 1 ||
            config.consensus.mode == ConsensusConfig::Mode::kFinalOnly) {
          auto result = consensus_execute(plan, factory, config.consensus, split.observed,
                                          options);
          outcome.answer = std::move(result.answer);
          outcome.trace = std::move(result.trace);
        } else {
          if (!answerer) answerer = factory(worker);
          auto result = execute_plan(plan, *answerer, split.observed, options);
          outcome.answer = std::move(result.answer);
          outcome.trace = std::move(result.trace);
        }
        outcome.ok = true;
      } catch (const ExecutionError& e) {
        outcome.error = e.what();
        outcome.trace = e.partial_trace();
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
    }
  };

  if (config.workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < config.workers; ++w) pool.emplace_back(work, w);
  }
  if (options.cache && config.workers > 1) serialize_cache_flags(batch);
  for (const auto& o : batch.outcomes) batch.failed += o.ok ? 0 : 1;
  return batch;
}

std::string raw_answer_records(const BatchResult& batch) {
  std::string out;
  for (const auto& o : batch.outcomes) {
    json record = {{"id", o.id},
                   {"type", std::string(to_string(o.type))},
                   {"status", o.ok ? "ok" : "failed"},
                   {"answers", labels(o.answer.entities)},
                   {"violations", o.answer.violations}};
    if (!o.ok) record["error"] = o.error;
    out += record.dump() + "\n";
  }
  return out;
}

std::string batch_trace_records(const BatchResult& batch, bool timing) {
  std::string out;
  for (const auto& o : batch.outcomes) out += trace_records(o.id, o.trace, timing);
  return out;
}

std::vector<RawAnswer> read_raw_answers(std::istream& in) {
  std::vector<RawAnswer> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
        !record["id"].is_string() || !record.contains("answers") ||
        !record["answers"].is_array()) {
      throw FormatError("raw answer record needs \"id\" and \"answers\"", number);
    }
    RawAnswer raw;
    raw.id = record["id"].get<std::string>();
    raw.ok = record.value("status", std::string("ok")) == "ok";
    try {
      for (const auto& a : record["answers"]) {
        raw.answers.push_back(EntityId::parse(a.get<std::string>()));
      }
    } catch (const std::exception& e) {
      throw FormatError(e.what(), number);
    }
    out.push_back(std::move(raw));
  }
  return out;
}

MrrReport evaluate(const std::vector<QueryInstance>& instances,
                   const std::vector<RawAnswer>& answers, const RunConfig& config,
                   std::size_t entity_count) {
  if (instances.empty()) throw EvalError("no queries to evaluate");
  std::map<std::string, const RawAnswer*> by_id;
  for (const auto& a : answers) {
    if (!by_id.emplace(a.id, &a).second) throw EvalError("duplicate raw answer id " + a.id);
  }
  std::vector<RankRecord> records;
  std::map<QueryType, std::size_t> queries;
  std::map<QueryType, std::size_t> failed;
  for (const auto& instance : instances) {
    auto it = by_id.find(instance.id);
    if (it == by_id.end()) throw EvalError("id mismatch: no raw answer for " + instance.id);
    ++queries[instance.type];
    std::vector<EntityId> candidates;
    if (it->second->ok) {
      candidates = it->second->answers;
    } else {
      ++failed[instance.type];
    }
    auto ranked = rank_query(instance, candidates, entity_count);
    records.insert(records.end(), ranked.begin(), ranked.end());
    by_id.erase(it);
  }
  if (!by_id.empty()) {
    throw EvalError("id mismatch: raw answer " + by_id.begin()->first + " has no query");
  }
  return build_report(config.dataset, config.report_model(), records, queries, failed,
                      config.absent_policy);
}

}  // namespace kgqe
