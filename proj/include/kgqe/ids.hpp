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

#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgqe/error.hpp"

namespace kgqe {

// Dense integer identifier with a canonical text label: Prefix followed by
// the decimal index, e.g. "e12" or "r3". Surface names never leave the
// abstraction map; everything downstream speaks labels.
template <char Prefix>
class Id {
 public:
  using Index = std::uint32_t;

  constexpr Id() = default;
  constexpr explicit Id(Index index) : index_(index) {}

  constexpr Index index() const { return index_; }

  std::string label() const { return Prefix + std::to_string(index_); }

  // Accepts exactly the canonical form: Prefix followed by decimal digits
  // without leading zeros.
  static std::optional<Id> try_parse(std::string_view text) {
    if (text.size() < 2 || text.front() != Prefix) return std::nullopt;
    if (text.size() > 2 && text[1] == '0') return std::nullopt;
    const char* first = text.data() + 1;
    const char* last = text.data() + text.size();
    for (const char* p = first; p != last; ++p) {
      if (*p < '0' || *p > '9') return std::nullopt;
    }
    Index value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return Id(value);
  }

  static Id parse(std::string_view text) {
    if (auto id = try_parse(text)) return *id;
    throw FormatError("invalid " + std::string(kind()) + " label '" +
                      std::string(text) + "'");
  }

  static constexpr std::string_view kind() {
    return Prefix == 'e' ? "entity" : "relation";
  }

  friend constexpr auto operator<=>(Id, Id) = default;

 private:
  Index index_ = 0;
};

using EntityId = Id<'e'>;
using RelationId = Id<'r'>;

// Sorted, duplicate-free entity set. The helpers in set_ops.hpp keep the
// invariant; code that builds one by hand must call normalize().
using EntitySet = std::vector<EntityId>;

}  // namespace kgqe

template <char Prefix>
struct std::hash<kgqe::Id<Prefix>> {
  std::size_t operator()(kgqe::Id<Prefix> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.index());
  }
};
