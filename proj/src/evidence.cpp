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

#include "kgqe/evidence.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <set>

#include "kgqe/error.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

namespace detail {
extern const char kBuiltinPromptTemplate[];
}  // namespace detail

namespace {

std::string_view trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    auto nl = text.find('\n');
    out.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int size = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &size, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string out;
  char byte[3];
  for (unsigned int i = 0; i < size; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
    out += byte;
  }
  return out;
}

// Replaces "{name}" slots in one pass; unknown braces are copied verbatim.
std::string fill_slots(std::string_view text,
                       const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    auto close = text.find('}', open);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    auto it = slots.find(std::string(text.substr(open + 1, close - open - 1)));
    if (it != slots.end()) {
      out += it->second;
    } else {
      out.append(text.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(text.substr(std::min(pos, text.size())));
  return out;
}

}  // namespace

SerializedEvidence serialize_evidence(const EvidenceBundle& bundle) {
  SerializedEvidence out;
  out.triple_count = bundle.triples.size();
  out.text = "Triples:\n";
  for (const auto& t : bundle.triples) {
    out.text += "(" + t.head.label() + ", " + t.relation.label() + ", " +
                t.tail.label() + ")\n";
  }
  out.text += "Adjacency:\n";
  std::vector<Triple> sorted = bundle.triples;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::string line = sorted[i].head.label() + ": " + sorted[i].relation.label() + " -> ";
    while (j < sorted.size() && sorted[j].head == sorted[i].head &&
           sorted[j].relation == sorted[i].relation) {
      line += (j > i ? "," : "") + sorted[j].tail.label();
      ++j;
    }
    out.text += line + "\n";
    i = j;
  }
  return out;
}

std::vector<Triple> parse_evidence_triples(std::string_view text) {
  std::vector<Triple> out;
  bool in_triples = false;
  std::size_t number = 0;
  for (auto raw : split_lines(text)) {
    ++number;
    auto line = trim(raw);
    if (line == "Triples:") {
      in_triples = true;
      continue;
    }
    if (line == "Adjacency:") break;
    if (!in_triples || line.empty()) continue;
    if (line.size() < 2 || line.front() != '(' || line.back() != ')') {
      throw FormatError("evidence triple must look like (h, r, t)", number);
    }
    auto body = line.substr(1, line.size() - 2);
    auto c1 = body.find(", ");
    auto c2 = c1 == std::string_view::npos ? c1 : body.find(", ", c1 + 2);
    if (c2 == std::string_view::npos) {
      throw FormatError("evidence triple must look like (h, r, t)", number);
    }
    try {
      out.push_back({EntityId::parse(body.substr(0, c1)),
                     RelationId::parse(body.substr(c1 + 2, c2 - c1 - 2)),
                     EntityId::parse(body.substr(c2 + 2))});
    } catch (const FormatError& e) {
      throw FormatError(e.what(), number);
    }
  }
  return out;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate t;
  t.source_ = std::string(text);
  t.hash_ = sha256_hex(text);
  std::optional<std::string> current;
  std::string content;
  auto close = [&] {
    if (!current) return;
    while (!content.empty() && content.back() == '\n') content.pop_back();
    if (!t.sections_.emplace(*current, content).second) {
      throw PromptError("duplicate prompt section '" + *current + "'");
    }
    content.clear();
  };
  for (auto line : split_lines(text)) {
    if (line.starts_with("@@ ")) {
      close();
      current = std::string(trim(line.substr(3)));
    } else if (current) {
      content.append(line);
      content += '\n';
    } else if (!trim(line).empty() && !line.starts_with("#")) {
      throw PromptError("prompt asset text outside any section");
    }
  }
  close();
  for (const char* required :
       {"instruction.project", "instruction.intersect", "instruction.union",
        "instruction.subtract", "format", "prompt"}) {
    if (!t.sections_.count(required)) {
      throw PromptError(std::string("prompt asset lacks section '") + required + "'");
    }
  }
  t.sections_.try_emplace("exemplars", "");
  for (const char* slot : {"{instruction}", "{evidence}", "{arguments}", "{format}"}) {
    if (t.sections_["prompt"].find(slot) == std::string::npos) {
      throw PromptError(std::string("prompt section lacks slot ") + slot);
    }
  }
  return t;
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate t = parse(detail::kBuiltinPromptTemplate);
  return t;
}

const std::string& PromptTemplate::section(const std::string& name) const {
  return sections_.at(name);
}

std::string PromptTemplate::instruction(const Step& step) const {
  switch (step.kind) {
    case StepKind::kProject:
      return fill_slots(section("instruction.project"),
                        {{"relation", step.relation->label()}});
    case StepKind::kIntersect: return section("instruction.intersect");
    case StepKind::kUnion: return section("instruction.union");
    case StepKind::kSubtract: return section("instruction.subtract");
  }
  return {};
}

std::string placeholder(std::size_t step) { return "SET_" + std::to_string(step); }

StepPrompt render_prompt(const Step& step, const SerializedEvidence& evidence,
                         const Bindings& bindings,
                         const PromptTemplate& prompt_template) {
  StepPrompt prompt;
  prompt.step_index = step.index;
  auto render_source = [&](const SourceRef& source) -> std::string {
    if (const auto* literal = std::get_if<EntitySet>(&source)) {
      return join_labels(*literal);
    }
    std::size_t ref = std::get<StepRef>(source).step;
    auto it = bindings.find(ref);
    if (it == bindings.end()) {
      throw PromptError("missing binding for " + placeholder(ref));
    }
    prompt.bindings[placeholder(ref)] = it->second;
    return placeholder(ref) + " = {" + join_labels(it->second) + "}";
  };

  std::string arguments;
  switch (step.kind) {
    case StepKind::kProject:
      arguments = "source: " + render_source(step.sources.at(0)) + "\n" +
                  "relation: " + step.relation->label() + "\n";
      break;
    case StepKind::kIntersect:
    case StepKind::kUnion:
      arguments = "sets:\n";
      for (const auto& s : step.sources) {
        std::string text = render_source(s);
        arguments += std::holds_alternative<EntitySet>(s) ? "{" + text + "}\n" : text + "\n";
      }
      break;
    case StepKind::kSubtract:
      arguments = "base: " + render_source(step.base()) + "\n" +
                  "removed: " + render_source(step.removed()) + "\n";
      break;
  }

  prompt.text = fill_slots(prompt_template.body(),
                           {{"instruction", prompt_template.instruction(step)},
                            {"evidence", evidence.text},
                            {"arguments", arguments},
                            {"exemplars", prompt_template.exemplars()},
                            {"format", prompt_template.format()}});
  return prompt;
}

ParsedAnswer parse_answer(std::string_view raw) {
  ParsedAnswer out;
  std::vector<std::string_view> content;
  for (auto line : split_lines(raw)) {
    line = trim(line);
    if (!line.empty()) content.push_back(line);
  }
  if (content.size() == 1 && content.front() == "NONE") {
    out.explicit_none = true;
    return out;
  }
  std::set<EntityId> seen;
  for (auto line : content) {
    auto id = EntityId::try_parse(line);
    if (!id) {
      ++out.violations;
      continue;
    }
    if (seen.insert(*id).second) out.entities.push_back(*id);
  }
  return out;
}

std::string format_answer(std::span<const EntityId> entities) {
  if (entities.empty()) return "NONE\n";
  return join_labels(entities, "\n") + "\n";
}

}  // namespace kgqe
