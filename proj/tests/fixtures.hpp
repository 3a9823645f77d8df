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

// Shared fixtures and independent reference helpers for the test suites.
// The helpers here deliberately avoid the library's indexes and set
// operations so they can serve as oracles.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kgqe/graph.hpp"
#include "kgqe/query.hpp"

namespace kgqe::testing {

inline EntityId e(std::uint32_t i) { return EntityId(i); }
inline RelationId r(std::uint32_t i) { return RelationId(i); }

inline EntitySet ents(std::initializer_list<std::uint32_t> ids) {
  EntitySet out;
  for (auto i : ids) out.push_back(EntityId(i));
  return out;
}

// Entities e0..e5, relations r0 and r1.
inline std::vector<Triple> tiny_triples() {
  return {{e(0), r(0), e(1)}, {e(0), r(0), e(2)}, {e(1), r(1), e(3)},
          {e(2), r(1), e(3)}, {e(2), r(1), e(4)}, {e(4), r(0), e(5)}};
}

inline KnowledgeGraph tiny_kg() { return KnowledgeGraph(6, 2, tiny_triples()); }

inline std::string tiny_tsv() {
  std::string out;
  for (const auto& t : tiny_triples()) {
    out += t.head.label() + "\t" + t.relation.label() + "\t" + t.tail.label() + "\n";
  }
  return out;
}

// Linear scan over a raw triple list.
inline EntitySet scan_neighbors(const std::vector<Triple>& triples, EntityId entity,
                                RelationId relation, Direction direction) {
  std::set<EntityId> out;
  for (const auto& t : triples) {
    if (t.relation != relation) continue;
    if (direction == Direction::kForward && t.head == entity) out.insert(t.tail);
    if (direction == Direction::kBackward && t.tail == entity) out.insert(t.head);
  }
  return {out.begin(), out.end()};
}

struct RandomGraphSpec {
  std::size_t max_entities = 50;
  std::size_t max_relations = 5;
  std::size_t max_triples = 300;
};

// Random graph with every entity and relation index inside the declared
// ranges; duplicates are possible in the draw and collapse in the store.
inline std::vector<Triple> random_triples(std::mt19937_64& rng, std::size_t entities,
                                          std::size_t relations, std::size_t count) {
  std::uniform_int_distribution<std::uint32_t> pick_e(0, entities - 1);
  std::uniform_int_distribution<std::uint32_t> pick_r(0, relations - 1);
  std::vector<Triple> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({EntityId(pick_e(rng)), RelationId(pick_r(rng)), EntityId(pick_e(rng))});
  }
  return out;
}

inline KnowledgeGraph random_graph(std::mt19937_64& rng, const RandomGraphSpec& spec = {}) {
  std::uniform_int_distribution<std::size_t> pick_n(2, spec.max_entities);
  std::uniform_int_distribution<std::size_t> pick_m(1, spec.max_relations);
  std::uniform_int_distribution<std::size_t> pick_t(1, spec.max_triples);
  const std::size_t n = pick_n(rng);
  const std::size_t m = pick_m(rng);
  return KnowledgeGraph(n, m, random_triples(rng, n, m, pick_t(rng)));
}

// Splits a graph into (full, observed) by dropping each triple from the
// observed side with probability `held_out`.
inline GraphSplit random_split(const KnowledgeGraph& full, std::mt19937_64& rng,
                               double held_out = 0.2) {
  std::bernoulli_distribution drop(held_out);
  std::vector<Triple> kept;
  for (const auto& t : full.triples()) {
    if (!drop(rng)) kept.push_back(t);
  }
  KnowledgeGraph observed(full.entity_count(), full.relation_count(), kept);
  return GraphSplit::from_graphs(full, std::move(observed));
}

// Replaces every id of `query` with a uniformly random one. The result has the
// same shape but, unlike sampled queries, frequently has empty answers.
inline Query randomize_ids(const Query& query, std::mt19937_64& rng, std::size_t entities,
                           std::size_t relations) {
  std::uniform_int_distribution<std::uint32_t> pick_e(0, entities - 1);
  std::uniform_int_distribution<std::uint32_t> pick_r(0, relations - 1);
  if (query.as<Anchor>()) return Query::anchor(EntityId(pick_e(rng)));
  if (const auto* p = query.as<Projection>()) {
    auto child = randomize_ids(p->child, rng, entities, relations);
    return Query::project(child, RelationId(pick_r(rng)));
  }
  if (const auto* i = query.as<Intersection>()) {
    std::vector<std::pair<Query, bool>> branches;
    for (const auto& b : i->branches) {
      branches.emplace_back(randomize_ids(b.query, rng, entities, relations), b.negated);
    }
    return Query::intersect(std::move(branches));
  }
  std::vector<Query> children;
  for (const auto& c : query.as<Union>()->children) {
    children.push_back(randomize_ids(c, rng, entities, relations));
  }
  return Query::unite(std::move(children));
}

}  // namespace kgqe::testing
