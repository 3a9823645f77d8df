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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kgqe/ids.hpp"
#include "kgqe/query.hpp"

namespace kgqe {

enum class StepKind { kProject, kIntersect, kUnion, kSubtract };

std::string_view to_string(StepKind kind);

struct StepRef {
  std::size_t step;
  friend bool operator==(StepRef, StepRef) = default;
};

// Either a literal entity set (anchors) or the cached output of an earlier
// step.
using SourceRef = std::variant<EntitySet, StepRef>;

// One single-operator sub-query.
//   PROJECT:   sources = {source}, relation set
//   INTERSECT: sources.size() >= 2
//   UNION:     sources.size() >= 2
//   SUBTRACT:  sources = {base, removed}
struct Step {
  std::size_t index = 0;
  StepKind kind = StepKind::kProject;
  std::vector<SourceRef> sources;
  std::optional<RelationId> relation;

  const SourceRef& base() const { return sources.at(0); }
  const SourceRef& removed() const { return sources.at(1); }
};

struct Plan {
  std::vector<Step> steps;

  std::size_t output() const { return steps.size() - 1; }
};

// Depth-first, left-to-right. Sibling branches are fully emitted before the
// set operation that combines them; negated intersection branches are
// removed by SUBTRACT steps after the positive combination. Throws
// QueryError("unsupported structure") for a bare anchor.
Plan compile(const Query& query);

// Canonical key of the sub-computation rooted at `index`, e.g. "P|r0|{e0}".
// References are expanded to the referenced step's signature and the
// sources of INTERSECT/UNION are sorted.
std::string signature(const Plan& plan, std::size_t index);
std::vector<std::string> signatures(const Plan& plan);

// One line per step:
//   #0 PROJECT source={e0} relation=r0
//   #2 SUBTRACT base=#0 removed=#1
std::string pretty_print(const Plan& plan);

// One JSON object per line per step.
std::string plan_records(const Plan& plan);

// Entities of every literal the step depends on, transitively.
EntitySet anchor_entities(const Plan& plan, std::size_t index);

}  // namespace kgqe
