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

#include "kgqe/eval.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <array>
#include <set>

#include "json.hpp"
#include "kgqe/error.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {

std::string_view to_string(AbsentPolicy policy) {
  return policy == AbsentPolicy::kZero ? "zero" : "worst-rank";
}

std::optional<std::size_t> filtered_rank(std::span<const EntityId> candidates,
                                         EntityId target, const EntitySet& easy,
                                         const EntitySet& other_hard) {
  if (contains(easy, target) || contains(other_hard, target)) {
    throw EvalError("target " + target.label() + " is itself a filtered answer");
  }
  std::set<EntityId> seen;
  std::optional<std::size_t> rank;
  std::size_t counted = 0;
  for (auto c : candidates) {
    if (!seen.insert(c).second) {
      throw EvalError("duplicate candidate " + c.label());
    }
    if (rank) continue;
    if (c == target) {
      rank = counted + 1;
    } else if (!contains(easy, c) && !contains(other_hard, c)) {
      ++counted;
    }
  }
  return rank;
}

std::vector<RankRecord> rank_query(const QueryInstance& instance,
                                   std::span<const EntityId> candidates,
                                   std::size_t entity_count) {
  std::vector<RankRecord> out;
  const std::size_t filtered = instance.easy.size() + instance.hard.size();
  for (auto target : instance.hard) {
    EntitySet others = set_difference(instance.hard, EntitySet{target});
    RankRecord record;
    record.query_id = instance.id;
    record.type = instance.type;
    record.target = target;
    record.rank = filtered_rank(candidates, target, instance.easy, others);
    // Every entity that survives filtering, the target included.
    record.worst_rank = entity_count > filtered ? entity_count - filtered + 1 : 1;
    out.push_back(std::move(record));
  }
  return out;
}

double mrr(std::span<const RankRecord> records, AbsentPolicy policy) {
  if (records.empty()) throw EvalError("MRR over an empty record set");
  double sum = 0.0;
  for (const auto& r : records) {
    if (r.rank) {
      sum += 1.0 / static_cast<double>(*r.rank);
    } else if (policy == AbsentPolicy::kWorstRank) {
      sum += 1.0 / static_cast<double>(std::max<std::size_t>(r.worst_rank, 1));
    }
  }
  return sum / static_cast<double>(records.size());
}

MrrReport build_report(std::string dataset, std::string model,
                       std::span<const RankRecord> records,
                       const std::map<QueryType, std::size_t>& queries,
                       const std::map<QueryType, std::size_t>& failed,
                       AbsentPolicy policy) {
  MrrReport report;
  report.dataset = std::move(dataset);
  report.model = std::move(model);
  report.policy = policy;
  std::map<QueryType, std::vector<RankRecord>> by_type;
  for (const auto& r : records) by_type[r.type].push_back(r);
  for (const auto& [type, group] : by_type) {
    TypeScore score;
    score.mrr = mrr(group, policy);
    score.n = group.size();
    score.absent = static_cast<std::size_t>(
        std::count_if(group.begin(), group.end(), [](const RankRecord& r) { return !r.rank; }));
    report.scores[type] = score;
  }
  for (const auto& [type, count] : queries) report.scores[type].queries = count;
  for (const auto& [type, count] : failed) report.scores[type].failed = count;
  return report;
}

std::span<const QueryType> layout_columns(Layout layout) {
  static constexpr std::array<QueryType, 9> typical = {
      QueryType::k1p, QueryType::k2p, QueryType::k3p, QueryType::k2i, QueryType::k3i,
      QueryType::kIp, QueryType::kPi, QueryType::k2u, QueryType::kUp};
  static constexpr std::array<QueryType, 5> negation = {
      QueryType::k2in, QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};
  if (layout == Layout::kTypical) return typical;
  return negation;
}

std::string format_cell(std::optional<double> value) {
  if (!value) return "–";
  return fmt::format("{:.1f}", *value * 100.0);
}

namespace {

// Display width in code points; cells hold ASCII or the en dash.
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t width, bool left) {
  std::string fill(width - std::min(width, display_width(s)), ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

std::string render_table(std::span<const MrrReport> rows, Layout layout) {
  auto columns = layout_columns(layout);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Dataset", "Model"};
  for (auto type : columns) header.emplace_back(to_string(type));
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line = {row.dataset, row.model};
    for (auto type : columns) {
      auto it = row.scores.find(type);
      bool has = it != row.scores.end() && it->second.n > 0;
      line.push_back(format_cell(has ? std::optional<double>(it->second.mrr) : std::nullopt));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      widths[i] = std::max(widths[i], display_width(line[i]));
    }
  }
  std::string out;
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) text += "  ";
      text += pad(line[i], widths[i], i < 2);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  }
  return out;
}

std::string render_report(std::span<const MrrReport> rows) {
  AbsentPolicy policy = rows.empty() ? AbsentPolicy::kZero : rows.front().policy;
  std::string out = "# MRR x100, filtered; candidates ranked by answer-list order\n";
  out += "# absent hard answers: " + std::string(to_string(policy)) + "\n";
  auto has = [&](bool negation_types) {
    return std::any_of(rows.begin(), rows.end(), [&](const MrrReport& r) {
      return std::any_of(r.scores.begin(), r.scores.end(), [&](const auto& kv) {
        return is_negation_type(kv.first) == negation_types;
      });
    });
  };
  const bool negation = has(true);
  if (has(false) || !negation) out += render_table(rows, Layout::kTypical);
  if (negation) {
    if (has(false)) out += "\n";
    out += render_table(rows, Layout::kNegation);
  }
  return out;
}

std::string report_records(const MrrReport& report) {
  std::string out;
  for (const auto& [type, score] : report.scores) {
    nlohmann::json record = {{"dataset", report.dataset},
                             {"model", report.model},
                             {"type", std::string(to_string(type))},
                             {"mrr", score.mrr},
                             {"n", score.n},
                             {"absent", score.absent},
                             {"queries", score.queries},
                             {"failed", score.failed}};
    out += record.dump() + "\n";
  }
  return out;
}

}  // namespace kgqe
