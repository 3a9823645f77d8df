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

#include "kgqe/query.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "kgqe/error.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 14> kTags = {
    "1p", "2p", "3p", "2i", "3i", "ip", "pi", "2u", "up",
    "2in", "3in", "inp", "pin", "pni",
};

template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <typename... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

std::string_view to_string(QueryType type) {
  return kTags[static_cast<std::size_t>(type)];
}

QueryType parse_query_type(std::string_view tag) {
  for (std::size_t i = 0; i < kTags.size(); ++i) {
    if (kTags[i] == tag) return static_cast<QueryType>(i);
  }
  throw QueryError("unknown query type '" + std::string(tag) + "'");
}

bool is_negation_type(QueryType type) {
  return static_cast<int>(type) >= static_cast<int>(QueryType::k2in);
}

Query Query::anchor(EntityId entity) {
  return Query(std::make_shared<const Node>(Anchor{entity}));
}

Query Query::project(Query child, RelationId relation) {
  return Query(std::make_shared<const Node>(Projection{std::move(child), relation}));
}

Query Query::intersect(std::vector<std::pair<Query, bool>> branches) {
  if (branches.size() < 2) {
    throw QueryError("intersection needs at least two branches");
  }
  Intersection node;
  bool any_positive = false;
  for (auto& [query, negated] : branches) {
    any_positive = any_positive || !negated;
    node.branches.push_back({std::move(query), negated});
  }
  if (!any_positive) {
    throw QueryError("intersection needs at least one non-negated branch");
  }
  return Query(std::make_shared<const Node>(std::move(node)));
}

Query Query::unite(std::vector<Query> children) {
  if (children.size() < 2) throw QueryError("union needs at least two children");
  return Query(std::make_shared<const Node>(Union{std::move(children)}));
}

bool operator==(const Query& a, const Query& b) {
  if (a.node_ == b.node_) return true;
  return std::visit(
      Overloaded{
          [](const Anchor& x, const Anchor& y) { return x.entity == y.entity; },
          [](const Projection& x, const Projection& y) {
            return x.relation == y.relation && x.child == y.child;
          },
          [](const Intersection& x, const Intersection& y) {
            return std::equal(x.branches.begin(), x.branches.end(),
                              y.branches.begin(), y.branches.end(),
                              [](const Branch& l, const Branch& r) {
                                return l.negated == r.negated && l.query == r.query;
                              });
          },
          [](const Union& x, const Union& y) { return x.children == y.children; },
          [](const auto&, const auto&) { return false; },
      },
      a.node(), b.node());
}

std::string shape_of(const Query& query) {
  return std::visit(
      Overloaded{
          [](const Anchor&) -> std::string { return "a"; },
          [](const Projection& p) -> std::string {
            return "p(" + shape_of(p.child) + ")";
          },
          [](const Intersection& n) -> std::string {
            std::vector<std::string> parts;
            for (const auto& b : n.branches) {
              parts.push_back((b.negated ? "!" : "") + shape_of(b.query));
            }
            std::sort(parts.begin(), parts.end());
            std::string out = "i(";
            for (std::size_t i = 0; i < parts.size(); ++i) {
              out += (i ? "," : "") + parts[i];
            }
            return out + ")";
          },
          [](const Union& n) -> std::string {
            std::vector<std::string> parts;
            for (const auto& c : n.children) parts.push_back(shape_of(c));
            std::sort(parts.begin(), parts.end());
            std::string out = "u(";
            for (std::size_t i = 0; i < parts.size(); ++i) {
              out += (i ? "," : "") + parts[i];
            }
            return out + ")";
          },
      },
      query.node());
}

Query template_for(QueryType type) {
  const EntityId e(0);
  const RelationId r(0);
  auto p1 = [&] { return Query::project(Query::anchor(e), r); };
  auto p2 = [&] { return Query::project(p1(), r); };
  switch (type) {
    case QueryType::k1p: return p1();
    case QueryType::k2p: return p2();
    case QueryType::k3p: return Query::project(p2(), r);
    case QueryType::k2i: return Query::intersect({{p1(), false}, {p1(), false}});
    case QueryType::k3i:
      return Query::intersect({{p1(), false}, {p1(), false}, {p1(), false}});
    case QueryType::kIp:
      return Query::project(Query::intersect({{p1(), false}, {p1(), false}}), r);
    case QueryType::kPi: return Query::intersect({{p2(), false}, {p1(), false}});
    case QueryType::k2u: return Query::unite({p1(), p1()});
    case QueryType::kUp: return Query::project(Query::unite({p1(), p1()}), r);
    case QueryType::k2in: return Query::intersect({{p1(), false}, {p1(), true}});
    case QueryType::k3in:
      return Query::intersect({{p1(), false}, {p1(), false}, {p1(), true}});
    case QueryType::kInp:
      return Query::project(Query::intersect({{p1(), false}, {p1(), true}}), r);
    case QueryType::kPin: return Query::intersect({{p2(), false}, {p1(), true}});
    case QueryType::kPni: return Query::intersect({{p2(), true}, {p1(), false}});
  }
  throw QueryError("unknown query type");
}

QueryType classify(const Query& query) {
  static const std::unordered_map<std::string, QueryType> by_shape = [] {
    std::unordered_map<std::string, QueryType> m;
    for (auto type : kAllQueryTypes) m.emplace(shape_of(template_for(type)), type);
    return m;
  }();
  auto it = by_shape.find(shape_of(query));
  if (it == by_shape.end()) throw QueryError("unsupported structure");
  return it->second;
}

void check_ids(const Query& query, const KnowledgeGraph& graph) {
  std::visit(Overloaded{
                 [&](const Anchor& a) { graph.check(a.entity); },
                 [&](const Projection& p) {
                   graph.check(p.relation);
                   check_ids(p.child, graph);
                 },
                 [&](const Intersection& n) {
                   for (const auto& b : n.branches) check_ids(b.query, graph);
                 },
                 [&](const Union& n) {
                   for (const auto& c : n.children) check_ids(c, graph);
                 },
             },
             query.node());
}

namespace {

std::set<EntityId> brute_force(const Query& query, const KnowledgeGraph& graph) {
  return std::visit(
      Overloaded{
          [](const Anchor& a) { return std::set<EntityId>{a.entity}; },
          [&](const Projection& p) {
            auto sources = brute_force(p.child, graph);
            std::set<EntityId> out;
            for (const auto& t : graph.triples()) {
              if (t.relation == p.relation && sources.count(t.head)) out.insert(t.tail);
            }
            return out;
          },
          [&](const Intersection& n) {
            std::optional<std::set<EntityId>> acc;
            std::vector<std::set<EntityId>> removed;
            for (const auto& b : n.branches) {
              auto s = brute_force(b.query, graph);
              if (b.negated) {
                removed.push_back(std::move(s));
              } else if (!acc) {
                acc = std::move(s);
              } else {
                std::set<EntityId> kept;
                for (auto id : *acc) {
                  if (s.count(id)) kept.insert(id);
                }
                acc = std::move(kept);
              }
            }
            for (const auto& r : removed) {
              for (auto id : r) acc->erase(id);
            }
            return *acc;
          },
          [&](const Union& n) {
            std::set<EntityId> out;
            for (const auto& c : n.children) {
              auto s = brute_force(c, graph);
              out.insert(s.begin(), s.end());
            }
            return out;
          },
      },
      query.node());
}

}  // namespace

EntitySet eval_brute_force(const Query& query, const KnowledgeGraph& graph) {
  check_ids(query, graph);
  auto s = brute_force(query, graph);
  return EntitySet(s.begin(), s.end());
}

QueryInstance make_instance(std::string id, const Query& query,
                            const GraphSplit& split) {
  QueryInstance instance;
  instance.id = std::move(id);
  instance.type = classify(query);
  instance.query = query;
  instance.easy = eval_brute_force(query, split.observed);
  instance.hard = set_difference(eval_brute_force(query, split.full), instance.easy);
  return instance;
}

namespace {

EntityId random_tail(const KnowledgeGraph& graph, std::mt19937_64& rng) {
  auto triples = graph.triples();
  std::uniform_int_distribution<std::size_t> pick(0, triples.size() - 1);
  return triples[pick(rng)].tail;
}

// Rebuilds `shape` so that `target` is among its answers over `graph`.
std::optional<Query> walk_back(const Query& shape, EntityId target,
                               const KnowledgeGraph& graph, std::mt19937_64& rng) {
  return std::visit(
      Overloaded{
          [&](const Anchor&) -> std::optional<Query> { return Query::anchor(target); },
          [&](const Projection& p) -> std::optional<Query> {
            auto incoming = graph.in_edges(target);
            if (incoming.empty()) return std::nullopt;
            std::uniform_int_distribution<std::size_t> pick(0, incoming.size() - 1);
            const Triple& edge = incoming[pick(rng)];
            auto child = walk_back(p.child, edge.head, graph, rng);
            if (!child) return std::nullopt;
            return Query::project(std::move(*child), edge.relation);
          },
          [&](const Intersection& n) -> std::optional<Query> {
            std::vector<std::pair<Query, bool>> branches;
            for (const auto& b : n.branches) {
              // Negated branches answer something else; the instance is
              // rejected later if subtraction empties it.
              EntityId from = b.negated ? random_tail(graph, rng) : target;
              auto q = walk_back(b.query, from, graph, rng);
              if (!q) return std::nullopt;
              branches.emplace_back(std::move(*q), b.negated);
            }
            return Query::intersect(std::move(branches));
          },
          [&](const Union& n) -> std::optional<Query> {
            std::vector<Query> children;
            for (const auto& c : n.children) {
              auto q = walk_back(c, target, graph, rng);
              if (!q) return std::nullopt;
              children.push_back(std::move(*q));
            }
            return Query::unite(std::move(children));
          },
      },
      shape.node());
}

}  // namespace

std::optional<Query> sample_query(const KnowledgeGraph& graph, QueryType type,
                                  std::mt19937_64& rng) {
  if (graph.triple_count() == 0) return std::nullopt;
  return walk_back(template_for(type), random_tail(graph, rng), graph, rng);
}

std::vector<QueryInstance> generate_instances(const GraphSplit& split,
                                              QueryType type, std::size_t count,
                                              const GenerationOptions& options) {
  if (count == 0) throw GenerationError("instance count must be at least 1", 0);
  std::mt19937_64 rng(options.seed);
  std::vector<QueryInstance> out;
  const std::size_t budget = count * options.retry_factor;
  for (std::size_t attempt = 0; attempt < budget && out.size() < count; ++attempt) {
    auto query = sample_query(split.full, type, rng);
    if (!query) continue;
    auto full_answers = eval_brute_force(*query, split.full);
    if (full_answers.empty()) continue;
    std::string id = std::string(to_string(type)) + "-" + std::to_string(out.size());
    auto instance = make_instance(std::move(id), *query, split);
    if (instance.hard.empty()) continue;
    // Negation is not monotone: an observed-graph answer can vanish once the
    // held-out triples are added. Such instances would break easy + hard = full.
    if (!set_difference(instance.easy, full_answers).empty()) continue;
    out.push_back(std::move(instance));
  }
  if (out.size() < count) {
    throw GenerationError("retry budget of " + std::to_string(budget) +
                              " attempts exhausted for " + std::string(to_string(type)) +
                              ": produced " + std::to_string(out.size()) + " of " +
                              std::to_string(count) + " instances",
                          out.size());
  }
  return out;
}

namespace {

json to_json(const Query& query) {
  return std::visit(
      Overloaded{
          [](const Anchor& a) { return json::array({"A", a.entity.label()}); },
          [](const Projection& p) {
            return json::array({"P", to_json(p.child), p.relation.label()});
          },
          [](const Intersection& n) {
            json out = json::array({"I"});
            for (const auto& b : n.branches) {
              out.push_back(json::array({to_json(b.query), b.negated}));
            }
            return out;
          },
          [](const Union& n) {
            json out = json::array({"U"});
            for (const auto& c : n.children) out.push_back(to_json(c));
            return out;
          },
      },
      query.node());
}

Query from_json(const json& ast) {
  if (!ast.is_array() || ast.empty() || !ast[0].is_string()) {
    throw FormatError("ast node must be a non-empty array starting with an operator");
  }
  const std::string op = ast[0].get<std::string>();
  if (op == "A") {
    if (ast.size() != 2 || !ast[1].is_string()) throw FormatError("bad anchor node");
    return Query::anchor(EntityId::parse(ast[1].get<std::string>()));
  }
  if (op == "P") {
    if (ast.size() != 3 || !ast[2].is_string()) throw FormatError("bad projection node");
    return Query::project(from_json(ast[1]),
                          RelationId::parse(ast[2].get<std::string>()));
  }
  if (op == "U") {
    std::vector<Query> children;
    for (std::size_t i = 1; i < ast.size(); ++i) children.push_back(from_json(ast[i]));
    return Query::unite(std::move(children));
  }
  if (op == "I") {
    std::vector<std::pair<Query, bool>> branches;
    for (std::size_t i = 1; i < ast.size(); ++i) {
      const auto& b = ast[i];
      if (!b.is_array() || b.size() != 2 || !b[1].is_boolean()) {
        throw FormatError("intersection branch must be [ast, negated]");
      }
      branches.emplace_back(from_json(b[0]), b[1].get<bool>());
    }
    return Query::intersect(std::move(branches));
  }
  throw FormatError("unknown ast operator '" + op + "'");
}

json parse_line(std::string_view line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

EntitySet parse_label_list(const json& list) {
  if (!list.is_array()) throw FormatError("expected a list of entity labels");
  EntitySet out;
  for (const auto& item : list) {
    if (!item.is_string()) throw FormatError("entity label must be a string");
    out.push_back(EntityId::parse(item.get<std::string>()));
  }
  return normalize(std::move(out));
}

template <typename Fn>
void for_each_line(std::istream& in, Fn fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), number);
    } catch (const QueryError& e) {
      throw FormatError(e.what(), number);
    }
  }
}

}  // namespace

std::string query_to_text(const Query& query) { return to_json(query).dump(); }

Query query_from_text(std::string_view text) { return from_json(parse_line(text)); }

QueryInstance parse_query_record(std::string_view line) {
  json record = parse_line(line);
  if (!record.is_object() || !record.contains("id") || !record.contains("type") ||
      !record.contains("ast") || !record["id"].is_string() || !record["type"].is_string()) {
    throw FormatError("query record needs string \"id\", string \"type\" and \"ast\"");
  }
  QueryInstance instance;
  instance.id = record["id"].get<std::string>();
  instance.type = parse_query_type(record["type"].get<std::string>());
  instance.query = from_json(record["ast"]);
  QueryType actual = classify(instance.query);
  if (actual != instance.type) {
    throw QueryError("structure/tag mismatch: declared " +
                     std::string(to_string(instance.type)) + ", structure is " +
                     std::string(to_string(actual)));
  }
  return instance;
}

std::string query_record(const QueryInstance& instance) {
  json record = {{"id", instance.id},
                 {"type", std::string(to_string(instance.type))},
                 {"ast", to_json(instance.query)}};
  return record.dump();
}

std::string answer_record(const QueryInstance& instance) {
  json record = {{"id", instance.id},
                 {"easy", labels(instance.easy)},
                 {"hard", labels(instance.hard)}};
  return record.dump();
}

std::vector<QueryInstance> read_query_file(std::istream& queries) {
  std::vector<QueryInstance> out;
  std::set<std::string> seen;
  for_each_line(queries, [&](const std::string& line) {
    auto instance = parse_query_record(line);
    if (!seen.insert(instance.id).second) {
      throw FormatError("duplicate query id '" + instance.id + "'");
    }
    out.push_back(std::move(instance));
  });
  return out;
}

void read_answer_file(std::istream& answers, std::vector<QueryInstance>& instances) {
  std::map<std::string, QueryInstance*> by_id;
  for (auto& instance : instances) by_id[instance.id] = &instance;
  std::set<std::string> matched;
  for_each_line(answers, [&](const std::string& line) {
    json record = parse_line(line);
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string()) {
      throw FormatError("answer record needs a string \"id\"");
    }
    const std::string id = record["id"].get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw FormatError("answer id '" + id + "' has no query");
    if (!matched.insert(id).second) throw FormatError("duplicate answer id '" + id + "'");
    it->second->easy = parse_label_list(record.value("easy", json::array()));
    it->second->hard = parse_label_list(record.value("hard", json::array()));
    if (!set_intersection(std::vector<EntitySet>{it->second->easy, it->second->hard})
             .empty()) {
      throw FormatError("answer id '" + id + "': easy and hard sets overlap");
    }
  });
  if (matched.size() != instances.size()) {
    for (const auto& instance : instances) {
      if (!matched.count(instance.id)) {
        throw FormatError("query id '" + instance.id + "' has no answer record");
      }
    }
  }
}

void write_query_file(std::ostream& out, const std::vector<QueryInstance>& instances) {
  for (const auto& instance : instances) out << query_record(instance) << '\n';
}

void write_answer_file(std::ostream& out, const std::vector<QueryInstance>& instances) {
  for (const auto& instance : instances) out << answer_record(instance) << '\n';
}

}  // namespace kgqe
