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

#include "kgqe/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <tuple>

#include "kgqe/error.hpp"

namespace kgqe {
namespace {

template <typename IdT>
IdT find_surface(const std::vector<std::string>& names, std::string_view key) {
  auto it = std::lower_bound(names.begin(), names.end(), key);
  if (it == names.end() || *it != key) {
    throw LookupError("unknown " + std::string(IdT::kind()) + " '" +
                      std::string(key) + "'");
  }
  return IdT(static_cast<typename IdT::Index>(it - names.begin()));
}

template <typename IdT>
const std::string& surface_of(const std::vector<std::string>& names, IdT id) {
  if (id.index() >= names.size()) {
    throw LookupError("unknown " + std::string(IdT::kind()) + " " + id.label());
  }
  return names[id.index()];
}

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

// offsets[e]..offsets[e+1] spans the triples whose key entity is e.
template <typename KeyFn>
std::vector<std::size_t> build_offsets(const std::vector<Triple>& sorted,
                                       std::size_t entity_count, KeyFn key) {
  std::vector<std::size_t> offsets(entity_count + 1, 0);
  for (const auto& t : sorted) ++offsets[key(t).index() + 1];
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  return offsets;
}

}  // namespace

AbstractionMap AbstractionMap::from_surfaces(std::vector<std::string> entities,
                                             std::vector<std::string> relations) {
  AbstractionMap map;
  sort_unique(entities);
  sort_unique(relations);
  map.entities_ = std::move(entities);
  map.relations_ = std::move(relations);
  return map;
}

EntityId AbstractionMap::entity(std::string_view surface) const {
  return find_surface<EntityId>(entities_, surface);
}

RelationId AbstractionMap::relation(std::string_view surface) const {
  return find_surface<RelationId>(relations_, surface);
}

const std::string& AbstractionMap::surface(EntityId id) const {
  return surface_of(entities_, id);
}

const std::string& AbstractionMap::surface(RelationId id) const {
  return surface_of(relations_, id);
}

void AbstractionMap::write(std::ostream& out) const {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    out << entities_[i] << '\t' << EntityId(i).label() << '\n';
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    out << relations_[i] << '\t' << RelationId(i).label() << '\n';
  }
}

KnowledgeGraph::KnowledgeGraph(std::size_t entity_count,
                               std::size_t relation_count,
                               std::vector<Triple> triples,
                               std::shared_ptr<const AbstractionMap> names)
    : entity_count_(entity_count),
      relation_count_(relation_count),
      forward_(std::move(triples)),
      names_(std::move(names)) {
  for (const auto& t : forward_) {
    check(t.head);
    check(t.relation);
    check(t.tail);
  }
  std::sort(forward_.begin(), forward_.end());
  forward_.erase(std::unique(forward_.begin(), forward_.end()), forward_.end());

  backward_ = forward_;
  std::sort(backward_.begin(), backward_.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.tail, a.relation, a.head) < std::tie(b.tail, b.relation, b.head);
  });

  forward_tails_.reserve(forward_.size());
  for (const auto& t : forward_) forward_tails_.push_back(t.tail);
  backward_heads_.reserve(backward_.size());
  for (const auto& t : backward_) backward_heads_.push_back(t.head);

  forward_offsets_ = build_offsets(forward_, entity_count_,
                                   [](const Triple& t) { return t.head; });
  backward_offsets_ = build_offsets(backward_, entity_count_,
                                    [](const Triple& t) { return t.tail; });
}

void KnowledgeGraph::check(EntityId id) const {
  if (id.index() >= entity_count_) {
    throw LookupError("entity " + id.label() + " out of range (" +
                      std::to_string(entity_count_) + " entities)");
  }
}

void KnowledgeGraph::check(RelationId id) const {
  if (id.index() >= relation_count_) {
    throw LookupError("relation " + id.label() + " out of range (" +
                      std::to_string(relation_count_) + " relations)");
  }
}

bool KnowledgeGraph::contains(const Triple& triple) const {
  return std::binary_search(forward_.begin(), forward_.end(), triple);
}

std::span<const Triple> KnowledgeGraph::out_edges(EntityId entity) const {
  check(entity);
  std::size_t begin = forward_offsets_[entity.index()];
  std::size_t end = forward_offsets_[entity.index() + 1];
  return std::span<const Triple>(forward_).subspan(begin, end - begin);
}

std::span<const Triple> KnowledgeGraph::in_edges(EntityId entity) const {
  check(entity);
  std::size_t begin = backward_offsets_[entity.index()];
  std::size_t end = backward_offsets_[entity.index() + 1];
  return std::span<const Triple>(backward_).subspan(begin, end - begin);
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId entity,
                                                    RelationId relation,
                                                    Direction direction) const {
  check(entity);
  check(relation);
  const bool forward = direction == Direction::kForward;
  const auto& edges = forward ? forward_ : backward_;
  const auto& offsets = forward ? forward_offsets_ : backward_offsets_;
  const auto& ids = forward ? forward_tails_ : backward_heads_;
  auto first = edges.begin() + static_cast<std::ptrdiff_t>(offsets[entity.index()]);
  auto last = edges.begin() + static_cast<std::ptrdiff_t>(offsets[entity.index() + 1]);
  auto lo = std::partition_point(first, last, [&](const Triple& t) {
    return t.relation < relation;
  });
  auto hi = std::partition_point(lo, last, [&](const Triple& t) {
    return t.relation == relation;
  });
  return std::span<const EntityId>(ids).subspan(
      static_cast<std::size_t>(lo - edges.begin()),
      static_cast<std::size_t>(hi - lo));
}

GraphSplit GraphSplit::from_graphs(KnowledgeGraph full, KnowledgeGraph observed) {
  if (full.entity_count() != observed.entity_count() ||
      full.relation_count() != observed.relation_count()) {
    throw Error("observed and full graphs do not share an id space");
  }
  for (const auto& t : observed.triples()) {
    if (!full.contains(t)) {
      throw Error("observed triple (" + t.head.label() + ", " +
                  t.relation.label() + ", " + t.tail.label() +
                  ") missing from full graph");
    }
  }
  GraphSplit split;
  split.names = full.shared_names();
  split.full = std::move(full);
  split.observed = std::move(observed);
  return split;
}

std::vector<RawTriple> read_raw_triples(std::istream& in, std::string_view source) {
  std::vector<RawTriple> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto first = line.find('\t');
    auto second = first == std::string::npos ? first : line.find('\t', first + 1);
    if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos) {
      throw FormatError(std::string(source) +
                            ": expected head<TAB>relation<TAB>tail",
                        line_number);
    }
    RawTriple raw{line.substr(0, first), line.substr(first + 1, second - first - 1),
                  line.substr(second + 1)};
    if (raw.head.empty() || raw.relation.empty() || raw.tail.empty()) {
      throw FormatError(std::string(source) + ": empty field", line_number);
    }
    out.push_back(std::move(raw));
  }
  return out;
}

namespace {

GraphSplit assemble(const std::vector<RawTriple>& observed,
                    const std::vector<RawTriple>& held_out) {
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  for (const auto* part : {&observed, &held_out}) {
    for (const auto& raw : *part) {
      entities.push_back(raw.head);
      entities.push_back(raw.tail);
      relations.push_back(raw.relation);
    }
  }
  auto names = std::make_shared<const AbstractionMap>(
      AbstractionMap::from_surfaces(std::move(entities), std::move(relations)));

  auto encode = [&](const RawTriple& raw) {
    return Triple{names->entity(raw.head), names->relation(raw.relation),
                  names->entity(raw.tail)};
  };
  std::vector<Triple> observed_ids;
  observed_ids.reserve(observed.size());
  for (const auto& raw : observed) observed_ids.push_back(encode(raw));
  std::vector<Triple> full_ids = observed_ids;
  for (const auto& raw : held_out) full_ids.push_back(encode(raw));

  GraphSplit split;
  split.names = names;
  split.full = KnowledgeGraph(names->entity_count(), names->relation_count(),
                              std::move(full_ids), names);
  split.observed = KnowledgeGraph(names->entity_count(), names->relation_count(),
                                  std::move(observed_ids), names);
  return split;
}

}  // namespace

KnowledgeGraph ingest_triples(std::istream& in, std::string_view source) {
  auto raw = read_raw_triples(in, source);
  if (raw.empty()) throw FormatError(std::string(source) + ": no triples");
  return assemble(raw, {}).full;
}

GraphSplit build_split(const std::vector<RawTriple>& observed,
                       const std::vector<RawTriple>& held_out) {
  if (observed.empty() && held_out.empty()) throw FormatError("no triples");
  return assemble(observed, held_out);
}

}  // namespace kgqe
