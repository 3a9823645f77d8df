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

#include <algorithm>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "kgqe/ids.hpp"

namespace kgqe {

inline EntitySet normalize(EntitySet values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

inline bool contains(const EntitySet& set, EntityId id) {
  return std::binary_search(set.begin(), set.end(), id);
}

inline EntitySet set_union(std::span<const EntitySet> sets) {
  EntitySet out;
  for (const auto& s : sets) {
    EntitySet merged;
    merged.reserve(out.size() + s.size());
    std::set_union(out.begin(), out.end(), s.begin(), s.end(),
                   std::back_inserter(merged));
    out = std::move(merged);
  }
  return out;
}

inline EntitySet set_intersection(std::span<const EntitySet> sets) {
  if (sets.empty()) return {};
  EntitySet out = sets.front();
  for (const auto& s : sets.subspan(1)) {
    EntitySet kept;
    std::set_intersection(out.begin(), out.end(), s.begin(), s.end(),
                          std::back_inserter(kept));
    out = std::move(kept);
  }
  return out;
}

inline EntitySet set_difference(const EntitySet& base, const EntitySet& removed) {
  EntitySet out;
  std::set_difference(base.begin(), base.end(), removed.begin(), removed.end(),
                      std::back_inserter(out));
  return out;
}

inline std::vector<std::string> labels(std::span<const EntityId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(id.label());
  return out;
}

// "e1, e2, e5"
inline std::string join_labels(std::span<const EntityId> ids,
                               std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += sep;
    out += ids[i].label();
  }
  return out;
}

}  // namespace kgqe
