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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgqe/ids.hpp"
#include "kgqe/query.hpp"

namespace kgqe {

// One hard answer of one query. `rank` is empty when the answer never shows
// up among the candidates.
struct RankRecord {
  std::string query_id;
  QueryType type = QueryType::k1p;
  EntityId target;
  std::optional<std::size_t> rank;
  // Rank if placed after every unfiltered entity; used by the worst-rank
  // absent policy.
  std::size_t worst_rank = 0;
};

enum class AbsentPolicy { kZero, kWorstRank };

std::string_view to_string(AbsentPolicy policy);

// 1 + number of candidates before `target` that are neither easy nor other
// hard answers; nullopt if `target` is not a candidate. Throws EvalError on
// duplicate candidates or when `target` is itself filtered.
std::optional<std::size_t> filtered_rank(std::span<const EntityId> candidates,
                                         EntityId target, const EntitySet& easy,
                                         const EntitySet& other_hard);

// One record per hard answer of `instance`.
std::vector<RankRecord> rank_query(const QueryInstance& instance,
                                   std::span<const EntityId> candidates,
                                   std::size_t entity_count);

// Mean of 1/rank over all records; absent ranks add 0 under kZero. Throws
// EvalError for an empty record set.
double mrr(std::span<const RankRecord> records, AbsentPolicy policy = AbsentPolicy::kZero);

struct TypeScore {
  double mrr = 0.0;
  std::size_t n = 0;        // rank records
  std::size_t absent = 0;
  std::size_t queries = 0;
  std::size_t failed = 0;   // queries whose execution failed
};

struct MrrReport {
  std::string dataset;
  std::string model;
  AbsentPolicy policy = AbsentPolicy::kZero;
  std::map<QueryType, TypeScore> scores;
};

// Groups records by type. `failed` counts failed queries per type; their
// hard answers must already be present as absent records.
MrrReport build_report(std::string dataset, std::string model,
                       std::span<const RankRecord> records,
                       const std::map<QueryType, std::size_t>& queries,
                       const std::map<QueryType, std::size_t>& failed,
                       AbsentPolicy policy = AbsentPolicy::kZero);

enum class Layout { kTypical, kNegation };

std::span<const QueryType> layout_columns(Layout layout);

// Value x100 with one decimal ("81.4"); missing values render as "–".
std::string format_cell(std::optional<double> value);

// Aligned text table with Dataset and Model columns followed by the layout's
// query types.
std::string render_table(std::span<const MrrReport> rows, Layout layout);

// Header lines stating the ranking and absent-answer conventions, then the
// typical table and, when any negation type is present, the negation table.
// An empty report renders the typical header only.
std::string render_report(std::span<const MrrReport> rows);

// One JSON object per type: {"absent","dataset","failed","model","mrr","n",
// "queries","type"}.
std::string report_records(const MrrReport& report);

}  // namespace kgqe
