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

// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero when any criterion fails.

#include <fmt/core.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "kgqe/config.hpp"
#include "kgqe/error.hpp"
#include "kgqe/evidence.hpp"
#include "kgqe/execution.hpp"
#include "kgqe/llm.hpp"
#include "kgqe/pipeline.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/query.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {
namespace {

using testing::e;
using testing::ents;

// Collects the first few failure messages of a criterion.
struct Check {
  std::vector<std::string> failures;
  std::size_t checked = 0;
  bool skipped = false;
  std::string note;

  void expect(bool ok, const std::string& what) {
    ++checked;
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() >= 5) failures.back() = what + " (and more)";
  }
};

std::string join(const EntitySet& set) {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) out += (i ? "," : "") + set[i].label();
  return out + "}";
}

const std::map<QueryType, std::size_t> kStepCounts = {
    {QueryType::k1p, 1},  {QueryType::k2p, 2},  {QueryType::k3p, 3},  {QueryType::k2i, 3},
    {QueryType::k3i, 4},  {QueryType::kIp, 4},  {QueryType::kPi, 4},  {QueryType::k2u, 3},
    {QueryType::kUp, 4},  {QueryType::k2in, 3}, {QueryType::k3in, 5}, {QueryType::kInp, 4},
    {QueryType::kPin, 4}, {QueryType::kPni, 4}};

bool refers_to(const SourceRef& source, std::size_t step) {
  const auto* ref = std::get_if<StepRef>(&source);
  return ref && ref->step == step;
}

void plan_shapes(Check& c) {
  for (auto type : kAllQueryTypes) {
    const std::string tag(to_string(type));
    Plan plan = compile(template_for(type));
    c.expect(plan.steps.size() == kStepCounts.at(type),
             fmt::format("{}: {} steps", tag, plan.steps.size()));
    if (type == QueryType::k3p) {
      bool chain = plan.steps.size() == 3;
      for (std::size_t i = 0; chain && i < 3; ++i) {
        chain = plan.steps[i].kind == StepKind::kProject &&
                (i == 0 ? std::holds_alternative<EntitySet>(plan.steps[i].sources[0])
                        : refers_to(plan.steps[i].sources[0], i - 1));
      }
      c.expect(chain, "3p is not three chained projections");
    }
    if (type == QueryType::k3i) {
      bool shape = plan.steps.size() == 4 && plan.steps[3].kind == StepKind::kIntersect &&
                   plan.steps[3].sources.size() == 3;
      for (std::size_t i = 0; shape && i < 3; ++i) {
        shape = plan.steps[i].kind == StepKind::kProject &&
                std::holds_alternative<EntitySet>(plan.steps[i].sources[0]) &&
                refers_to(plan.steps[3].sources[i], i);
      }
      c.expect(shape, "3i is not three projections then one intersection");
    }
    if (is_negation_type(type)) {
      // The negated intersection ends in SUBTRACT. For inp a projection of
      // that result follows, since the template projects after negating.
      const std::size_t last = plan.output();
      std::size_t closing = last;
      if (type == QueryType::kInp) {
        c.expect(plan.steps[last].kind == StepKind::kProject &&
                     refers_to(plan.steps[last].sources[0], last - 1),
                 "inp does not project the subtraction result");
        closing = last - 1;
      }
      c.expect(plan.steps[closing].kind == StepKind::kSubtract,
               tag + ": negated intersection does not end in SUBTRACT");
      for (std::size_t i = 0; i < closing; ++i) {
        c.expect(plan.steps[i].kind != StepKind::kSubtract || i + 1 == closing ||
                     plan.steps[i + 1].kind == StepKind::kSubtract,
                 tag + ": set operation after a subtraction");
      }
    }
  }
}

// Seeded corpus shared by the equivalence criteria: per graph and type, walk
// sampled instances (non-empty answers) mixed with id-randomised ones.
struct Corpus {
  std::vector<GraphSplit> splits;
  // (split index, query)
  std::map<QueryType, std::vector<std::pair<std::size_t, Query>>> queries;
};

Corpus build_corpus(std::size_t graphs, std::size_t per_graph) {
  Corpus corpus;
  std::mt19937_64 rng(20240531);
  for (std::size_t g = 0; g < graphs; ++g) {
    auto full = testing::random_graph(rng, {50, 5, 300});
    corpus.splits.push_back(testing::random_split(full, rng, 0.2));
    const auto& split = corpus.splits.back();
    for (auto type : kAllQueryTypes) {
      for (std::size_t i = 0; i < per_graph; ++i) {
        std::optional<Query> q;
        if (i % 2 == 0) {
          for (int attempt = 0; attempt < 50 && !q; ++attempt) {
            q = sample_query(split.full, type, rng);
          }
        }
        if (!q) {
          q = testing::randomize_ids(template_for(type), rng, split.full.entity_count(),
                                     split.full.relation_count());
        }
        corpus.queries[type].emplace_back(g, std::move(*q));
      }
    }
  }
  return corpus;
}

void oracle_equivalence(const Corpus& corpus, Check& c) {
  std::size_t nonempty = 0;
  for (const auto& [type, list] : corpus.queries) {
    c.expect(list.size() >= 200, fmt::format("{}: only {} instances", to_string(type), list.size()));
    for (const auto& [g, query] : list) {
      const auto& graph = corpus.splits[g].full;
      ExactAnswerer exact(graph);
      auto got = execute_plan(compile(query), exact, graph, {}).answer.as_set();
      auto want = eval_brute_force(query, graph);
      nonempty += !want.empty();
      c.expect(got == want, fmt::format("{} on graph {}: {} vs {}", query_to_text(query), g,
                                        join(got), join(want)));
    }
  }
  c.note = fmt::format("{} with non-empty answers", nonempty);
}

void retrieval_sufficiency(const Corpus& corpus, Check& c) {
  ExecutionOptions options;
  options.retrieval.k_hops = 1;
  options.retrieval.max_triples = RetrievalConfig::kUnbounded;
  std::size_t steps = 0;
  for (const auto& [type, list] : corpus.queries) {
    for (const auto& [g, query] : list) {
      const auto& observed = corpus.splits[g].observed;
      Plan plan = compile(query);
      ExactAnswerer exact(observed);
      EvidenceAnswerer evidence;
      auto want = execute_plan(plan, exact, observed, options);
      auto got = execute_plan(plan, evidence, observed, options);
      c.expect(got.trace.size() == want.trace.size(), "trace length differs");
      for (std::size_t i = 0; i < std::min(got.trace.size(), want.trace.size()); ++i) {
        ++steps;
        c.expect(got.trace[i].output.as_set() == want.trace[i].output.as_set(),
                 fmt::format("{} step {} on graph {}", query_to_text(query), i, g));
      }
      c.expect(got.answer.as_set() == want.answer.as_set(),
               fmt::format("{} final answer on graph {}", query_to_text(query), g));
    }
  }
  c.note = fmt::format("{} steps compared", steps);
}

RankRecord record(std::optional<std::size_t> rank) {
  RankRecord r;
  r.query_id = "q";
  r.rank = rank;
  r.worst_rank = 10;
  return r;
}

void mrr_fixtures(Check& c) {
  constexpr double kTol = 1e-9;
  std::vector<RankRecord> ranks = {record(1), record(2), record(4)};
  c.expect(std::abs(mrr(ranks) - 7.0 / 12.0) <= kTol, "ranks [1,2,4] != 7/12");

  QueryInstance inst;
  inst.id = "q";
  inst.easy = ents({9});
  inst.hard = ents({3, 4});
  std::vector<EntityId> candidates = {e(9), e(3), e(7), e(4)};
  auto records = rank_query(inst, candidates, 20);
  c.expect(records.size() == 2 && records[0].rank == 1u && records[1].rank == 2u,
           "worked filtered ranks are not (1, 2)");
  c.expect(std::abs(mrr(records) - 0.75) <= kTol, "worked example MRR != 0.75");

  std::vector<RankRecord> absent = {record(std::nullopt)};
  c.expect(mrr(absent) == 0.0, "ABSENT alone is not 0");
  std::vector<RankRecord> mixed = {record(1), record(std::nullopt)};
  c.expect(mrr(mixed) == 0.5, "ABSENT does not contribute exactly 0");
}

GraphSplit dense_enough_split(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KnowledgeGraph full(60, 4, testing::random_triples(rng, 60, 4, 150));
  return testing::random_split(full, rng, 0.25);
}

struct PipelineOutputs {
  std::string queries, answers, raw, traces, report, records;
};

PipelineOutputs exact_pipeline(const GraphSplit& split, std::uint64_t seed) {
  RunConfig config;
  config.dataset = "rand";
  config.count_per_type = 5;
  config.retry_factor = 1000;
  config.seed = seed;
  config.workers = 2;
  auto instances = generate_all(split, config);
  PipelineOutputs out;
  std::ostringstream q, a;
  write_query_file(q, instances);
  write_answer_file(a, instances);
  out.queries = q.str();
  out.answers = a.str();
  auto batch = run_batch(instances, split, config);
  out.raw = raw_answer_records(batch);
  out.traces = batch_trace_records(batch, false);
  std::istringstream raw(out.raw);
  auto report = evaluate(instances, read_raw_answers(raw), config, split.full.entity_count());
  std::vector<MrrReport> rows{report};
  out.report = render_report(rows);
  out.records = report_records(report);
  return out;
}

void determinism(Check& c) {
  auto split = dense_enough_split(77);
  auto first = exact_pipeline(split, 5);
  auto second = exact_pipeline(dense_enough_split(77), 5);
  c.expect(first.queries == second.queries, "query files differ");
  c.expect(first.answers == second.answers, "answer files differ");
  c.expect(first.raw == second.raw, "raw answers differ");
  c.expect(first.traces == second.traces, "traces differ");
  c.expect(first.report == second.report, "reports differ");
  c.expect(first.records == second.records, "report records differ");

  auto g = testing::tiny_kg();
  Plan plan = compile(Query::intersect(
      {{Query::project(Query::anchor(e(0)), RelationId(0)), false},
       {Query::project(Query::anchor(e(4)), RelationId(0)), true}}));
  EntitySet seeds = ents({0, 2});
  std::vector<RelationId> relations = {RelationId(1)};
  RetrievalConfig rc;
  rc.k_hops = 2;
  auto evidence = serialize_evidence(retrieve(g, seeds, relations, rc));
  Bindings bindings = {{0, ents({1, 2})}, {1, ents({5})}};
  for (int i = 0; i < 50; ++i) {
    c.expect(serialize_evidence(retrieve(g, seeds, relations, rc)).text == evidence.text,
             "serialize_evidence not byte-stable");
    for (const auto& step : plan.steps) {
      auto a = render_prompt(step, evidence, bindings).text;
      auto b = render_prompt(step, evidence, bindings).text;
      c.expect(a == b, "render_prompt not byte-stable");
    }
  }
}

class Counting final : public Answerer {
 public:
  explicit Counting(Answerer& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  bool consumes_evidence() const override { return inner_.consumes_evidence(); }
  AnswerList answer_step(const StepRequest& request) override {
    ++calls;
    return inner_.answer_step(request);
  }
  std::size_t calls = 0;

 private:
  Answerer& inner_;
};

AnswerList list_of(std::initializer_list<std::uint32_t> ids) {
  AnswerList out;
  for (auto i : ids) out.entities.push_back(e(i));
  return out;
}

void cache_and_consensus(Check& c) {
  auto split = dense_enough_split(91);
  std::mt19937_64 rng(13);
  std::size_t compared = 0;
  for (auto type : kAllQueryTypes) {
    for (int i = 0; i < 10; ++i) {
      auto query = sample_query(split.full, type, rng);
      if (!query) continue;
      Plan plan = compile(*query);
      for (bool evidence_backend : {false, true}) {
        ExactAnswerer exact(split.observed);
        EvidenceAnswerer evidence;
        Answerer& inner = evidence_backend ? static_cast<Answerer&>(evidence) : exact;
        StepCache cache;
        ExecutionOptions options;
        options.cache = &cache;
        Counting cold(inner);
        auto first = execute_plan(plan, cold, split.observed, options);
        Counting warm(inner);
        auto second = execute_plan(plan, warm, split.observed, options);
        c.expect(warm.calls == 0, fmt::format("warm cache made {} calls", warm.calls));
        c.expect(first.answer.entities == second.answer.entities, "warm output differs");

        AnswererFactory factory = [&](std::size_t) -> std::unique_ptr<Answerer> {
          if (evidence_backend) return std::make_unique<EvidenceAnswerer>();
          return std::make_unique<ExactAnswerer>(split.observed);
        };
        for (auto mode : {ConsensusConfig::Mode::kPerStep, ConsensusConfig::Mode::kFinalOnly}) {
          ConsensusConfig one{1, 0, mode};
          ConsensusConfig three{3, 0, mode};
          auto single = consensus_execute(plan, factory, one, split.observed, {});
          auto many = consensus_execute(plan, factory, three, split.observed, {});
          c.expect(single.answer.entities == many.answer.entities, "n=3 differs from n=1");
          ++compared;
        }
      }
    }
  }

  std::vector<AnswerList> votes = {list_of({3, 4}), list_of({3}), list_of({3, 5})};
  c.expect(aggregate_votes(votes, 2).as_set() == ents({3}), "hand-voted example != {e3}");

  std::uniform_int_distribution<std::uint32_t> pick(0, 9);
  for (int round = 0; round < 200; ++round) {
    std::vector<AnswerList> outputs(1 + round % 6);
    for (auto& out : outputs) {
      std::set<std::uint32_t> seen;
      for (int k = 0; k < 5; ++k) {
        auto id = pick(rng);
        if (seen.insert(id).second) out.entities.push_back(e(id));
      }
    }
    EntitySet previous = aggregate_votes(outputs, 1).as_set();
    for (std::size_t t = 2; t <= outputs.size(); ++t) {
      EntitySet next = aggregate_votes(outputs, t).as_set();
      c.expect(set_difference(next, previous).empty(), "raising the threshold added entities");
      previous = next;
    }
  }
  c.note = fmt::format("{} consensus comparisons", compared);
}

void output_protocol(Check& c) {
  auto none = parse_answer("NONE\n");
  c.expect(none.entities.empty() && none.explicit_none && none.violations == 0,
           "NONE is not an explicit empty answer");
  auto dup = parse_answer("e4\ne2\ne4\ne2\ne7\n");
  c.expect(dup.entities == std::vector<EntityId>{e(4), e(2), e(7)},
           "duplicates not removed in first-occurrence order");
  auto junk = parse_answer("e1\nthe answer is e2\nE3\ne04\n  e5  \n\nfoo\n");
  c.expect(junk.entities == std::vector<EntityId>{e(1), e(5)},
           "non-conforming lines emitted as entities");
  c.expect(junk.violations == 4, fmt::format("{} violations, expected 4", junk.violations));
}

void report_self_check(Check& c) {
  auto split = dense_enough_split(77);
  auto out = exact_pipeline(split, 5);
  std::istringstream records(out.records);
  std::size_t types = 0;
  for (std::string line; std::getline(records, line);) {
    ++types;
    c.expect(line.find("\"mrr\":1.0") != std::string::npos, "MRR below 1.0: " + line);
  }
  c.expect(types == kAllQueryTypes.size(), fmt::format("{} types scored", types));
  c.expect(out.report.find("Dataset  Model     1p     2p     3p     2i     3i     ip     pi"
                           "     2u     up\n") != std::string::npos,
           "typical layout header missing");
  c.expect(out.report.find("Dataset  Model    2in    3in    inp    pin    pni\n") !=
               std::string::npos,
           "negation layout header missing");
  c.expect(out.report.find("rand     exact  100.0  100.0  100.0  100.0  100.0  100.0  100.0"
                           "  100.0  100.0\n") != std::string::npos,
           "typical row is not all 100.0");
  c.expect(out.report.find("rand     exact  100.0  100.0  100.0  100.0  100.0\n") !=
               std::string::npos,
           "negation row is not all 100.0");
}

void live_endpoint(Check& c) {
  if (std::getenv("ROG_LLM_ENDPOINT") == nullptr) {
    c.skipped = true;
    c.note = "ROG_LLM_ENDPOINT unset";
    return;
  }
  std::vector<Triple> observed_triples;
  for (const auto& t : testing::tiny_triples()) {
    if (!(t.head == e(2) && t.tail == e(4))) observed_triples.push_back(t);
  }
  auto split = GraphSplit::from_graphs(testing::tiny_kg(),
                                       KnowledgeGraph(6, 2, std::move(observed_triples)));
  auto inst = make_instance("1p-0", Query::project(Query::anchor(e(2)), RelationId(1)), split);
  RunConfig config;
  config.backend = Backend::kLlm;
  config.transport.apply_environment();
  auto batch = run_batch({inst}, split, config);
  c.expect(batch.failed == 0,
           "query failed: " + (batch.outcomes.empty() ? "" : batch.outcomes[0].error));
  std::istringstream raw(raw_answer_records(batch));
  auto report = evaluate({inst}, read_raw_answers(raw), config, split.full.entity_count());
  std::vector<MrrReport> rows{report};
  auto text = render_report(rows);
  c.expect(text.find("llm") != std::string::npos, "report row missing");
  c.note = "answers: " + join(batch.outcomes.at(0).answer.as_set());
}

}  // namespace
}  // namespace kgqe

int main() {
  using namespace kgqe;
  using Clock = std::chrono::steady_clock;

  std::unique_ptr<Corpus> corpus;
  auto corpus_ref = [&]() -> const Corpus& {
    if (!corpus) corpus = std::make_unique<Corpus>(build_corpus(24, 10));
    return *corpus;
  };

  struct Criterion {
    int number;
    std::string title;
    double budget_s;
    std::function<void(Check&)> run;
  };
  std::vector<Criterion> criteria = {
      {1, "plan shapes", 1.0, plan_shapes},
      {2, "oracle equivalence", 120.0, [&](Check& c) { oracle_equivalence(corpus_ref(), c); }},
      {3, "retrieval sufficiency", 120.0,
       [&](Check& c) { retrieval_sufficiency(corpus_ref(), c); }},
      {4, "MRR fixtures", 1.0, mrr_fixtures},
      {5, "determinism", 60.0, determinism},
      {6, "cache and consensus", 60.0, cache_and_consensus},
      {7, "output protocol", 1.0, output_protocol},
      {8, "report self-check", 60.0, report_self_check},
      {9, "live endpoint smoke", 300.0, live_endpoint},
  };

  int failed = 0;
  for (const auto& criterion : criteria) {
    Check check;
    auto start = Clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& err) {
      check.failures.push_back(std::string("exception: ") + err.what());
    }
    double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (seconds > criterion.budget_s) {
      check.failures.push_back(fmt::format("took {:.2f}s, budget {:.0f}s", seconds,
                                           criterion.budget_s));
    }
    const char* verdict = check.skipped ? "SKIP" : check.failures.empty() ? "PASS" : "FAIL";
    std::string detail = fmt::format("{} checks, {:.2f}s", check.checked, seconds);
    if (!check.note.empty()) detail += ", " + check.note;
    fmt::print("criterion {}: {} {} ({})\n", criterion.number, verdict, criterion.title, detail);
    for (const auto& f : check.failures) fmt::print("    {}\n", f);
    if (!check.skipped && !check.failures.empty()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
