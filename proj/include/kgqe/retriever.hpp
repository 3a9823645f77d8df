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
#include <limits>
#include <span>
#include <vector>

#include "kgqe/graph.hpp"
#include "kgqe/ids.hpp"

namespace kgqe {

struct RetrievalConfig {
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  std::size_t k_hops = 1;
  std::size_t max_triples = 64;
  // Triples whose relation occurs in the step come first.
  bool relation_priority = true;
  // Seed later steps with the previous step's answers instead of the
  // query's anchors.
  bool expand_intermediates = true;

  // Throws ConfigError on k_hops == 0 or max_triples == 0.
  void validate() const;
};

struct EvidenceBundle {
  std::vector<Triple> triples;
  EntitySet seeds;
  bool truncated = false;
};

// Breadth-first expansion from `seeds` over both edge directions, k_hops deep.
// A triple found while expanding an entity at distance d has hop d + 1.
// Candidates are ordered by (relation tier, hop, head, relation, tail) and cut
// at max_triples. Throws RetrievalError when `seeds` is empty.
EvidenceBundle retrieve(const KnowledgeGraph& graph, const EntitySet& seeds,
                        std::span<const RelationId> step_relations,
                        const RetrievalConfig& config);

inline EntitySet reseed(const EntitySet& previous, const RetrievalConfig& config) {
  return config.expand_intermediates ? previous : EntitySet{};
}

}  // namespace kgqe
