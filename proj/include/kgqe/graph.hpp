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

#include <compare>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqe/ids.hpp"

namespace kgqe {

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

enum class Direction { kForward, kBackward };

// Bijection between surface strings and dense ids. Ids follow the ascending
// byte-wise order of the surface strings, entities and relations numbered
// independently, so the map is stable under any reordering of the input.
class AbstractionMap {
 public:
  AbstractionMap() = default;

  // Sorts and de-duplicates both vocabularies.
  static AbstractionMap from_surfaces(std::vector<std::string> entities,
                                      std::vector<std::string> relations);

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  EntityId entity(std::string_view surface) const;
  RelationId relation(std::string_view surface) const;
  const std::string& surface(EntityId id) const;
  const std::string& surface(RelationId id) const;

  // One "<surface>\t<label>" line per id, entities first.
  void write(std::ostream& out) const;

  friend bool operator==(const AbstractionMap&, const AbstractionMap&) = default;

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
};

// Immutable triple store. Triples are kept sorted by (head, relation, tail)
// together with a second copy sorted by (tail, relation, head); both carry
// per-entity offsets so an adjacency lookup is one offset read plus a
// binary search over that entity's edges.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::size_t entity_count, std::size_t relation_count,
                 std::vector<Triple> triples,
                 std::shared_ptr<const AbstractionMap> names = nullptr);

  std::size_t entity_count() const { return entity_count_; }
  std::size_t relation_count() const { return relation_count_; }
  std::size_t triple_count() const { return forward_.size(); }

  std::span<const Triple> triples() const { return forward_; }
  bool contains(const Triple& triple) const;

  // Sorted ascending. Throws LookupError for out-of-range ids.
  std::span<const EntityId> neighbors(EntityId entity, RelationId relation,
                                      Direction direction) const;

  // Edges leaving `entity`, sorted by (relation, tail).
  std::span<const Triple> out_edges(EntityId entity) const;
  // Edges entering `entity`, sorted by (relation, head).
  std::span<const Triple> in_edges(EntityId entity) const;

  void check(EntityId id) const;
  void check(RelationId id) const;

  // Null for graphs built directly from ids.
  const AbstractionMap* names() const { return names_.get(); }
  std::shared_ptr<const AbstractionMap> shared_names() const { return names_; }

 private:
  std::size_t entity_count_ = 0;
  std::size_t relation_count_ = 0;
  std::vector<Triple> forward_;   // (head, relation, tail)
  std::vector<Triple> backward_;  // (tail, relation, head)
  std::vector<EntityId> forward_tails_;
  std::vector<EntityId> backward_heads_;
  std::vector<std::size_t> forward_offsets_;
  std::vector<std::size_t> backward_offsets_;
  std::shared_ptr<const AbstractionMap> names_;
};

// Full graph plus the observed (incomplete) graph visible at answer time.
// Both share one abstraction map; observed ⊆ full.
struct GraphSplit {
  std::shared_ptr<const AbstractionMap> names;
  KnowledgeGraph full;
  KnowledgeGraph observed;

  // Checks the shared id space and observed ⊆ full.
  static GraphSplit from_graphs(KnowledgeGraph full, KnowledgeGraph observed);
};

struct RawTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

// Reads head<TAB>relation<TAB>tail lines. Blank lines are skipped; any other
// line without exactly two tabs raises FormatError with its 1-based number.
std::vector<RawTriple> read_raw_triples(std::istream& in,
                                        std::string_view source);

// Builds a standalone graph with its own abstraction map. Throws FormatError
// ("no triples") when the stream holds no triple lines.
KnowledgeGraph ingest_triples(std::istream& in, std::string_view source);

// Abstraction map covers the vocabulary of both parts; full = observed ∪
// held_out.
GraphSplit build_split(const std::vector<RawTriple>& observed,
                       const std::vector<RawTriple>& held_out);

}  // namespace kgqe
