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

#include "kgqe/plan.hpp"

#include <algorithm>
#include <functional>

#include "json.hpp"
#include "kgqe/error.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::kProject: return "PROJECT";
    case StepKind::kIntersect: return "INTERSECT";
    case StepKind::kUnion: return "UNION";
    case StepKind::kSubtract: return "SUBTRACT";
  }
  return "?";
}

namespace {

class Compiler {
 public:
  Plan take() && { return std::move(plan_); }

  SourceRef emit(const Query& query) {
    if (const auto* a = query.as<Anchor>()) return EntitySet{a->entity};
    if (const auto* p = query.as<Projection>()) {
      SourceRef source = emit(p->child);
      return push(StepKind::kProject, {std::move(source)}, p->relation);
    }
    if (const auto* u = query.as<Union>()) {
      std::vector<SourceRef> sources;
      for (const auto& child : u->children) sources.push_back(emit(child));
      return push(StepKind::kUnion, std::move(sources));
    }
    const auto& node = *query.as<Intersection>();
    std::vector<SourceRef> positive;
    std::vector<SourceRef> negative;
    for (const auto& branch : node.branches) {
      (branch.negated ? negative : positive).push_back(emit(branch.query));
    }
    SourceRef result = positive.size() == 1
                           ? std::move(positive.front())
                           : push(StepKind::kIntersect, std::move(positive));
    for (auto& removed : negative) {
      result = push(StepKind::kSubtract, {std::move(result), std::move(removed)});
    }
    return result;
  }

 private:
  StepRef push(StepKind kind, std::vector<SourceRef> sources,
               std::optional<RelationId> relation = std::nullopt) {
    Step step;
    step.index = plan_.steps.size();
    step.kind = kind;
    step.sources = std::move(sources);
    step.relation = relation;
    plan_.steps.push_back(std::move(step));
    return StepRef{plan_.steps.size() - 1};
  }

  Plan plan_;
};

std::string literal_text(const EntitySet& set) {
  return "{" + join_labels(set, ",") + "}";
}

std::string source_text(const SourceRef& source) {
  if (const auto* literal = std::get_if<EntitySet>(&source)) return literal_text(*literal);
  return "#" + std::to_string(std::get<StepRef>(source).step);
}

}  // namespace

Plan compile(const Query& query) {
  if (query.as<Anchor>()) throw QueryError("unsupported structure: bare anchor");
  Compiler compiler;
  SourceRef out = compiler.emit(query);
  Plan plan = std::move(compiler).take();
  // A positive-only intersection always emits a step, so the last emitted
  // step is the query's output.
  if (!std::holds_alternative<StepRef>(out) ||
      std::get<StepRef>(out).step != plan.output()) {
    throw QueryError("unsupported structure");
  }
  return plan;
}

std::vector<std::string> signatures(const Plan& plan) {
  std::vector<std::string> out;
  out.reserve(plan.steps.size());
  auto source_sig = [&](const SourceRef& source) {
    if (const auto* literal = std::get_if<EntitySet>(&source)) {
      return literal_text(normalize(*literal));
    }
    return "[" + out.at(std::get<StepRef>(source).step) + "]";
  };
  for (const auto& step : plan.steps) {
    std::vector<std::string> args;
    for (const auto& s : step.sources) args.push_back(source_sig(s));
    std::string sig;
    switch (step.kind) {
      case StepKind::kProject:
        sig = "P|" + step.relation->label() + "|" + args.at(0);
        break;
      case StepKind::kIntersect:
      case StepKind::kUnion:
        std::sort(args.begin(), args.end());
        sig = step.kind == StepKind::kIntersect ? "I" : "U";
        for (const auto& a : args) sig += "|" + a;
        break;
      case StepKind::kSubtract:
        sig = "S|" + args.at(0) + "|" + args.at(1);
        break;
    }
    out.push_back(std::move(sig));
  }
  return out;
}

std::string signature(const Plan& plan, std::size_t index) {
  if (index >= plan.steps.size()) throw Error("step index out of range");
  Plan prefix;
  prefix.steps.assign(plan.steps.begin(), plan.steps.begin() + static_cast<std::ptrdiff_t>(index) + 1);
  return signatures(prefix).back();
}

std::string pretty_print(const Plan& plan) {
  std::string out;
  for (const auto& step : plan.steps) {
    out += "#" + std::to_string(step.index) + " " + std::string(to_string(step.kind));
    switch (step.kind) {
      case StepKind::kProject:
        out += " source=" + source_text(step.sources[0]) +
               " relation=" + step.relation->label();
        break;
      case StepKind::kIntersect:
      case StepKind::kUnion:
        out += " sources=";
        for (std::size_t i = 0; i < step.sources.size(); ++i) {
          out += (i ? "," : "") + source_text(step.sources[i]);
        }
        break;
      case StepKind::kSubtract:
        out += " base=" + source_text(step.base()) +
               " removed=" + source_text(step.removed());
        break;
    }
    out += '\n';
  }
  return out;
}

std::string plan_records(const Plan& plan) {
  auto sigs = signatures(plan);
  std::string out;
  for (const auto& step : plan.steps) {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& s : step.sources) {
      if (const auto* literal = std::get_if<EntitySet>(&s)) {
        sources.push_back({{"literal", labels(*literal)}});
      } else {
        sources.push_back({{"step", std::get<StepRef>(s).step}});
      }
    }
    nlohmann::json record = {{"index", step.index},
                             {"kind", std::string(to_string(step.kind))},
                             {"sources", sources},
                             {"signature", sigs[step.index]}};
    if (step.relation) record["relation"] = step.relation->label();
    out += record.dump() + "\n";
  }
  return out;
}

EntitySet anchor_entities(const Plan& plan, std::size_t index) {
  EntitySet out;
  std::function<void(std::size_t)> visit = [&](std::size_t i) {
    for (const auto& s : plan.steps.at(i).sources) {
      if (const auto* literal = std::get_if<EntitySet>(&s)) {
        out.insert(out.end(), literal->begin(), literal->end());
      } else {
        visit(std::get<StepRef>(s).step);
      }
    }
  };
  visit(index);
  return normalize(std::move(out));
}

}  // namespace kgqe
