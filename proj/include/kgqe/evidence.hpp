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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgqe/graph.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/retriever.hpp"

namespace kgqe {

struct SerializedEvidence {
  std::string text;
  std::size_t triple_count = 0;
};

// Two sections, both deterministic:
//   Triples:
//   (e0, r0, e1)
//   Adjacency:
//   e0: r0 -> e1,e2
// Triple lines keep bundle order; adjacency lines are grouped by head then
// relation in ascending id order.
SerializedEvidence serialize_evidence(const EvidenceBundle& bundle);

// Recovers the triple section. Throws FormatError on malformed lines.
std::vector<Triple> parse_evidence_triples(std::string_view text);

// Versioned prompt wording, loaded from a sectioned asset file (see
// assets/prompt_template.txt). The built-in copy is compiled from that file.
class PromptTemplate {
 public:
  static PromptTemplate parse(std::string_view text);
  static const PromptTemplate& builtin();

  const std::string& source() const { return source_; }
  // Hex SHA-256 of source(); recorded in run outputs.
  const std::string& hash() const { return hash_; }

  std::string instruction(const Step& step) const;
  const std::string& format() const { return section("format"); }
  const std::string& exemplars() const { return section("exemplars"); }
  const std::string& body() const { return section("prompt"); }

 private:
  const std::string& section(const std::string& name) const;

  std::string source_;
  std::string hash_;
  std::map<std::string, std::string> sections_;
};

// "SET_3"
std::string placeholder(std::size_t step);

struct StepPrompt {
  std::string text;
  std::size_t step_index = 0;
  std::map<std::string, EntitySet> bindings;
};

// Step index -> resolved output of that step.
using Bindings = std::map<std::size_t, EntitySet>;

// Throws PromptError when the step references a step missing from
// `bindings`.
StepPrompt render_prompt(const Step& step, const SerializedEvidence& evidence,
                         const Bindings& bindings,
                         const PromptTemplate& prompt_template = PromptTemplate::builtin());

struct ParsedAnswer {
  std::vector<EntityId> entities;
  std::size_t violations = 0;
  bool explicit_none = false;
};

// Total. Lines are trimmed and blank ones skipped. A lone "NONE" line means
// an explicit empty answer; otherwise "NONE" lines count as violations, as
// does any line that is not a canonical entity label. Entities keep first
// occurrence order.
ParsedAnswer parse_answer(std::string_view raw);

// Inverse of parse_answer: one label per line, or "NONE".
std::string format_answer(std::span<const EntityId> entities);

}  // namespace kgqe
