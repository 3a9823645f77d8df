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

#include "kgqe/retriever.hpp"

#include <algorithm>
#include <tuple>
#include <set>
#include <unordered_map>

#include "kgqe/error.hpp"

namespace kgqe {

void RetrievalConfig::validate() const {
  if (k_hops == 0) throw ConfigError("k_hops must be at least 1");
  if (max_triples == 0) throw ConfigError("max_triples must be at least 1");
}

namespace {

struct Candidate {
  int tier;
  std::size_t hop;
  Triple triple;

  bool operator<(const Candidate& o) const {
    return std::tie(tier, hop, triple) < std::tie(o.tier, o.hop, o.triple);
  }
};

}  // namespace

EvidenceBundle retrieve(const KnowledgeGraph& graph, const EntitySet& seeds,
                        std::span<const RelationId> step_relations,
                        const RetrievalConfig& config) {
  config.validate();
  if (seeds.empty()) throw RetrievalError("empty seed set");
  for (auto s : seeds) graph.check(s);

  std::unordered_map<EntityId, std::size_t> distance;
  std::vector<EntityId> frontier;
  for (auto s : seeds) {
    if (distance.emplace(s, 0).second) frontier.push_back(s);
  }

  auto relation_matches = [&](RelationId r) {
    return std::find(step_relations.begin(), step_relations.end(), r) !=
           step_relations.end();
  };

  std::vector<Candidate> candidates;
  for (std::size_t hop = 1; hop <= config.k_hops && !frontier.empty(); ++hop) {
    std::vector<EntityId> next;
    auto visit = [&](const Triple& t, EntityId other) {
      int tier = config.relation_priority && relation_matches(t.relation) ? 0 : 1;
      candidates.push_back({tier, hop, t});
      if (distance.emplace(other, hop).second) next.push_back(other);
    };
    for (auto entity : frontier) {
      for (const auto& t : graph.out_edges(entity)) visit(t, t.tail);
      for (const auto& t : graph.in_edges(entity)) visit(t, t.head);
    }
    frontier = std::move(next);
  }

  // A triple's tier does not depend on its hop, so after sorting the first
  // occurrence of each triple carries its minimal hop.
  std::sort(candidates.begin(), candidates.end());
  EvidenceBundle bundle;
  bundle.seeds = seeds;
  std::set<Triple> emitted;
  for (const auto& c : candidates) {
    if (emitted.insert(c.triple).second) bundle.triples.push_back(c.triple);
  }
  if (bundle.triples.size() > config.max_triples) {
    bundle.truncated = true;
    bundle.triples.resize(config.max_triples);
  }
  return bundle;
}

}  // namespace kgqe
