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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kgqe/graph.hpp"
#include "kgqe/ids.hpp"

namespace kgqe {

enum class QueryType {
  k1p, k2p, k3p, k2i, k3i, kIp, kPi, k2u, kUp,
  k2in, k3in, kInp, kPin, kPni,
};

inline constexpr std::array<QueryType, 14> kAllQueryTypes = {
    QueryType::k1p,  QueryType::k2p,  QueryType::k3p, QueryType::k2i,
    QueryType::k3i,  QueryType::kIp,  QueryType::kPi, QueryType::k2u,
    QueryType::kUp,  QueryType::k2in, QueryType::k3in, QueryType::kInp,
    QueryType::kPin, QueryType::kPni,
};

std::string_view to_string(QueryType type);
// Throws QueryError for anything outside the 14 tags.
QueryType parse_query_type(std::string_view tag);
bool is_negation_type(QueryType type);

class Query;

struct Anchor {
  EntityId entity;
};

struct Projection;
struct Intersection;
struct Union;

// Immutable AST handle. Copies share the node; there is no way to mutate a
// node after construction, so sharing is safe across threads.
class Query {
 public:
  using Node = std::variant<Anchor, Projection, Intersection, Union>;

  static Query anchor(EntityId entity);
  static Query project(Query child, RelationId relation);
  // Throws QueryError unless there are >= 2 branches and at least one is
  // positive.
  static Query intersect(std::vector<std::pair<Query, bool>> branches);
  static Query unite(std::vector<Query> children);

  const Node& node() const;

  template <typename T>
  const T* as() const;

  friend bool operator==(const Query& a, const Query& b);

 private:
  explicit Query(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Projection {
  Query child;
  RelationId relation;
};

struct Branch {
  Query query;
  bool negated = false;
};

struct Intersection {
  std::vector<Branch> branches;
};

struct Union {
  std::vector<Query> children;
};

inline const Query::Node& Query::node() const { return *node_; }

template <typename T>
const T* Query::as() const {
  return std::get_if<T>(node_.get());
}

// Structural fingerprint ignoring ids, e.g. "i(!p(a),p(p(a)))". Children of
// intersections and unions are sorted, so it is permutation-invariant.
std::string shape_of(const Query& query);

// Throws QueryError("unsupported structure") when no template matches.
QueryType classify(const Query& query);

// Template instance for `type` with every id set to 0; the generator walks it
// to choose real anchors and relations.
Query template_for(QueryType type);

// Reference semantics by full scan of the triple list. Intentionally does not
// touch the adjacency indexes so it stays independent of the executors.
EntitySet eval_brute_force(const Query& query, const KnowledgeGraph& graph);

// Checks every id against the graph; throws LookupError.
void check_ids(const Query& query, const KnowledgeGraph& graph);

struct QueryInstance {
  std::string id;
  QueryType type = QueryType::k1p;
  Query query = Query::anchor(EntityId(0));
  EntitySet easy;
  EntitySet hard;
};

// easy = answers over observed, hard = answers over full minus easy.
QueryInstance make_instance(std::string id, const Query& query,
                            const GraphSplit& split);

struct GenerationOptions {
  std::uint64_t seed = 0;
  // Attempts allowed per requested instance.
  std::size_t retry_factor = 100;
};

// Draws one query of the given shape by walking edges backwards from a random
// target in `graph`, so every projection has at least one successor. Returns
// nullopt when the walk hits an entity with no incoming edges.
std::optional<Query> sample_query(const KnowledgeGraph& graph, QueryType type,
                                  std::mt19937_64& rng);

// Instances with an empty hard-answer set are discarded and redrawn. Throws
// GenerationError once count * retry_factor attempts are used up.
std::vector<QueryInstance> generate_instances(const GraphSplit& split,
                                              QueryType type, std::size_t count,
                                              const GenerationOptions& options);

// Compact nested-array text: ["A","e0"] | ["P",q,"r0"] | ["U",q,q,...] |
// ["I",[q,neg],[q,neg],...].
std::string query_to_text(const Query& query);
Query query_from_text(std::string_view text);

// One JSON object per line: {"ast","id","type"}. Parsing checks the declared
// type against classify().
QueryInstance parse_query_record(std::string_view line);
std::string query_record(const QueryInstance& instance);
// {"easy","hard","id"}
std::string answer_record(const QueryInstance& instance);

// Line-oriented files. read_answer_file joins easy/hard sets by id and
// throws FormatError for ids it cannot match.
std::vector<QueryInstance> read_query_file(std::istream& queries);
void read_answer_file(std::istream& answers, std::vector<QueryInstance>& instances);
void write_query_file(std::ostream& out, const std::vector<QueryInstance>& instances);
void write_answer_file(std::ostream& out, const std::vector<QueryInstance>& instances);

}  // namespace kgqe
