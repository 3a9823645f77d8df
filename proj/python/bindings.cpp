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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "kgqe/config.hpp"
#include "kgqe/error.hpp"
#include "kgqe/eval.hpp"
#include "kgqe/evidence.hpp"
#include "kgqe/execution.hpp"
#include "kgqe/graph.hpp"
#include "kgqe/pipeline.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/query.hpp"
#include "kgqe/retriever.hpp"
#include "kgqe/set_ops.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using kgqe::EntityId;
using kgqe::EntitySet;
using kgqe::RelationId;

using LabelTriple = std::tuple<std::string, std::string, std::string>;

std::vector<std::string> to_labels(std::span<const EntityId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(id.label());
  return out;
}

EntitySet entity_set(const std::vector<std::string>& items) {
  EntitySet out;
  for (const auto& s : items) out.push_back(EntityId::parse(s));
  return kgqe::normalize(std::move(out));
}

std::vector<LabelTriple> triple_labels(std::span<const kgqe::Triple> triples) {
  std::vector<LabelTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.emplace_back(t.head.label(), t.relation.label(), t.tail.label());
  return out;
}

std::vector<kgqe::RawTriple> raw_from_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return kgqe::read_raw_triples(in, source);
}

kgqe::RetrievalConfig retrieval_config(std::size_t k_hops, std::optional<std::size_t> max_triples,
                                       bool relation_priority) {
  kgqe::RetrievalConfig c;
  c.k_hops = k_hops;
  c.max_triples = max_triples.value_or(kgqe::RetrievalConfig::kUnbounded);
  c.relation_priority = relation_priority;
  c.validate();
  return c;
}

py::dict instance_dict(const kgqe::QueryInstance& inst) {
  return py::dict("id"_a = inst.id, "type"_a = std::string(kgqe::to_string(inst.type)),
                  "query"_a = kgqe::query_to_text(inst.query), "easy"_a = to_labels(inst.easy),
                  "hard"_a = to_labels(inst.hard));
}

kgqe::QueryInstance instance_from(const py::dict& d) {
  kgqe::QueryInstance inst;
  inst.id = d["id"].cast<std::string>();
  inst.query = kgqe::query_from_text(d["query"].cast<std::string>());
  inst.type = kgqe::classify(inst.query);
  inst.easy = entity_set(d["easy"].cast<std::vector<std::string>>());
  inst.hard = entity_set(d["hard"].cast<std::vector<std::string>>());
  return inst;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Step-wise logical query execution over knowledge graphs";

  auto error = py::register_exception<kgqe::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<kgqe::FormatError>(m, "FormatError", error);
  py::register_exception<kgqe::LookupError>(m, "LookupError", error);
  py::register_exception<kgqe::QueryError>(m, "QueryError", error);
  py::register_exception<kgqe::GenerationError>(m, "GenerationError", error);
  py::register_exception<kgqe::RetrievalError>(m, "RetrievalError", error);
  py::register_exception<kgqe::PromptError>(m, "PromptError", error);
  py::register_exception<kgqe::ConfigError>(m, "ConfigError", error);
  py::register_exception<kgqe::TransportError>(m, "TransportError", error);
  py::register_exception<kgqe::ScriptError>(m, "ScriptError", error);
  py::register_exception<kgqe::EvalError>(m, "EvalError", error);
  py::register_exception<kgqe::ExecutionError>(m, "ExecutionError", error);

  py::class_<kgqe::KnowledgeGraph>(m, "KnowledgeGraph")
      .def(py::init([](std::size_t entities, std::size_t relations,
                       const std::vector<LabelTriple>& triples) {
             std::vector<kgqe::Triple> parsed;
             for (const auto& [h, r, t] : triples) {
               parsed.push_back({EntityId::parse(h), RelationId::parse(r), EntityId::parse(t)});
             }
             return kgqe::KnowledgeGraph(entities, relations, std::move(parsed));
           }),
           "entity_count"_a, "relation_count"_a, "triples"_a)
      .def_static(
          "from_tsv",
          [](const std::string& text) {
            std::istringstream in(text);
            return kgqe::ingest_triples(in, "<tsv>");
          },
          "text"_a, "Ingests head<TAB>relation<TAB>tail lines with lexicographic ids.")
      .def_property_readonly("entity_count", &kgqe::KnowledgeGraph::entity_count)
      .def_property_readonly("relation_count", &kgqe::KnowledgeGraph::relation_count)
      .def_property_readonly("triple_count", &kgqe::KnowledgeGraph::triple_count)
      .def("triples", [](const kgqe::KnowledgeGraph& g) { return triple_labels(g.triples()); })
      .def(
          "neighbors",
          [](const kgqe::KnowledgeGraph& g, const std::string& entity,
             const std::string& relation, bool forward) {
            return to_labels(g.neighbors(EntityId::parse(entity), RelationId::parse(relation),
                                      forward ? kgqe::Direction::kForward
                                              : kgqe::Direction::kBackward));
          },
          "entity"_a, "relation"_a, "forward"_a = true)
      .def("surface", [](const kgqe::KnowledgeGraph& g, const std::string& label) {
        if (!g.names()) throw kgqe::LookupError("graph has no abstraction map");
        if (label.starts_with('r')) return g.names()->surface(RelationId::parse(label));
        return g.names()->surface(EntityId::parse(label));
      });

  py::class_<kgqe::GraphSplit>(m, "GraphSplit")
      .def_static(
          "from_tsv",
          [](const std::string& observed, const std::string& held_out) {
            return kgqe::build_split(raw_from_text(observed, "<observed>"),
                                     raw_from_text(held_out, "<held-out>"));
          },
          "observed"_a, "held_out"_a)
      .def_readonly("full", &kgqe::GraphSplit::full)
      .def_readonly("observed", &kgqe::GraphSplit::observed);

  m.def(
      "classify", [](const std::string& query) {
        return std::string(kgqe::to_string(kgqe::classify(kgqe::query_from_text(query))));
      },
      "query"_a, "Structural type tag of a query in nested-array text form.");
  m.def(
      "template", [](const std::string& type) {
        return kgqe::query_to_text(kgqe::template_for(kgqe::parse_query_type(type)));
      },
      "type"_a);
  m.def(
      "eval_brute_force",
      [](const std::string& query, const kgqe::KnowledgeGraph& graph) {
        return to_labels(kgqe::eval_brute_force(kgqe::query_from_text(query), graph));
      },
      "query"_a, "graph"_a);

  m.def(
      "compile",
      [](const std::string& query) {
        auto plan = kgqe::compile(kgqe::query_from_text(query));
        py::list steps;
        for (const auto& step : plan.steps) steps.append(std::string(kgqe::to_string(step.kind)));
        return py::dict("steps"_a = steps, "signatures"_a = kgqe::signatures(plan),
                        "pretty"_a = kgqe::pretty_print(plan));
      },
      "query"_a);

  m.def(
      "execute",
      [](const std::string& query, const kgqe::KnowledgeGraph& graph, const std::string& backend,
         std::size_t k_hops, std::optional<std::size_t> max_triples) {
        kgqe::ExecutionOptions options;
        options.retrieval = retrieval_config(k_hops, max_triples, true);
        auto plan = kgqe::compile(kgqe::query_from_text(query));
        kgqe::ExecutionResult result;
        if (backend == "exact") {
          kgqe::ExactAnswerer answerer(graph);
          result = kgqe::execute_plan(plan, answerer, graph, options);
        } else if (backend == "evidence") {
          kgqe::EvidenceAnswerer answerer;
          result = kgqe::execute_plan(plan, answerer, graph, options);
        } else {
          throw kgqe::ConfigError("backend must be 'exact' or 'evidence'");
        }
        return py::dict("answers"_a = to_labels(result.answer.entities),
                        "trace"_a = kgqe::trace_records("q", result.trace));
      },
      "query"_a, "graph"_a, "backend"_a = "exact", "k_hops"_a = 1,
      "max_triples"_a = py::none());

  m.def(
      "retrieve",
      [](const kgqe::KnowledgeGraph& graph, const std::vector<std::string>& seeds,
         const std::vector<std::string>& relations, std::size_t k_hops,
         std::optional<std::size_t> max_triples, bool relation_priority) {
        std::vector<RelationId> rels;
        for (const auto& r : relations) rels.push_back(RelationId::parse(r));
        auto bundle = kgqe::retrieve(graph, entity_set(seeds), rels,
                                     retrieval_config(k_hops, max_triples, relation_priority));
        return py::dict("triples"_a = triple_labels(bundle.triples),
                        "truncated"_a = bundle.truncated,
                        "text"_a = kgqe::serialize_evidence(bundle).text);
      },
      "graph"_a, "seeds"_a, "relations"_a = std::vector<std::string>{}, "k_hops"_a = 1,
      "max_triples"_a = 64, "relation_priority"_a = true);

  m.def(
      "parse_answer",
      [](const std::string& raw) {
        auto parsed = kgqe::parse_answer(raw);
        return py::dict("entities"_a = to_labels(parsed.entities),
                        "violations"_a = parsed.violations,
                        "explicit_none"_a = parsed.explicit_none);
      },
      "raw"_a);
  m.def("prompt_template_sha256", [] { return kgqe::PromptTemplate::builtin().hash(); });

  m.def(
      "filtered_rank",
      [](const std::vector<std::string>& candidates, const std::string& target,
         const std::vector<std::string>& easy, const std::vector<std::string>& other_hard) {
        std::vector<EntityId> list;
        for (const auto& c : candidates) list.push_back(EntityId::parse(c));
        return kgqe::filtered_rank(list, EntityId::parse(target), entity_set(easy),
                                   entity_set(other_hard));
      },
      "candidates"_a, "target"_a, "easy"_a, "other_hard"_a);
  m.def(
      "mrr",
      [](const std::vector<std::optional<std::size_t>>& ranks) {
        std::vector<kgqe::RankRecord> records;
        for (auto r : ranks) {
          kgqe::RankRecord rec;
          rec.rank = r;
          records.push_back(rec);
        }
        return kgqe::mrr(records);
      },
      "ranks"_a, "Mean reciprocal rank; None entries count as zero.");

  m.def(
      "generate",
      [](const kgqe::GraphSplit& split, const std::string& type, std::size_t count,
         std::uint64_t seed, std::size_t retry_factor) {
        py::list out;
        for (const auto& inst : kgqe::generate_instances(split, kgqe::parse_query_type(type),
                                                         count, {seed, retry_factor})) {
          out.append(instance_dict(inst));
        }
        return out;
      },
      "split"_a, "type"_a, "count"_a, "seed"_a = 0, "retry_factor"_a = 100);

  m.def(
      "run",
      [](const py::list& instances, const kgqe::GraphSplit& split,
         const std::map<std::string, std::string>& settings) {
        kgqe::RunConfig config;
        for (const auto& [key, value] : settings) config.set(key, value);
        config.validate();
        std::vector<kgqe::QueryInstance> parsed;
        for (const auto& item : instances) parsed.push_back(instance_from(item.cast<py::dict>()));
        kgqe::BatchResult batch;
        {
          py::gil_scoped_release release;
          batch = kgqe::run_batch(parsed, split, config);
        }
        std::istringstream raw(kgqe::raw_answer_records(batch));
        auto report =
            kgqe::evaluate(parsed, kgqe::read_raw_answers(raw), config, split.full.entity_count());
        std::vector<kgqe::MrrReport> rows{report};
        py::dict mrr;
        for (const auto& [type, score] : report.scores) {
          mrr[py::str(std::string(kgqe::to_string(type)))] = score.mrr;
        }
        return py::dict("failed"_a = batch.failed, "answers"_a = kgqe::raw_answer_records(batch),
                        "traces"_a = kgqe::batch_trace_records(batch, false),
                        "mrr"_a = mrr, "report"_a = kgqe::render_report(rows));
      },
      "instances"_a, "split"_a, "config"_a = std::map<std::string, std::string>{},
      "Runs a batch with RunConfig key/value settings and scores it.");
}
