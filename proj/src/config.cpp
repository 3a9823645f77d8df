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

#include "kgqe/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "kgqe/error.hpp"

namespace kgqe {

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::kExact: return "exact";
    case Backend::kEvidence: return "evidence";
    case Backend::kLlm: return "llm";
    case Backend::kScripted: return "scripted";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(expected) + ")");
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true or false");
}

}  // namespace

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k = {
      {"dataset", "dataset label used in reports"},
      {"model", "model label used in reports (default: backend name)"},
      {"train_triples", "observed triples (TSV)"},
      {"valid_triples", "validation triples (TSV), part of the full graph"},
      {"test_triples", "held-out triples (TSV), part of the full graph"},
      {"observed_includes_valid", "add validation triples to the observed graph"},
      {"queries", "query file (one JSON record per line)"},
      {"answers", "answer file with easy/hard sets"},
      {"output_dir", "directory for run outputs"},
      {"types", "comma-separated query types"},
      {"count_per_type", "instances generated per query type"},
      {"seed", "generation seed"},
      {"retry_factor", "generation attempts allowed per requested instance"},
      {"k_hops", "retrieval depth"},
      {"max_triples", "evidence cap per step (integer or inf)"},
      {"relation_priority", "rank triples of the step's relation first"},
      {"expand_intermediates", "seed retrieval from intermediate answers"},
      {"backend", "exact | evidence | llm | scripted"},
      {"exact_graph", "graph used by the exact backend: full | observed"},
      {"script", "scripted backend outputs (JSON lines)"},
      {"llm_endpoint", "remote model URL (default: ROG_LLM_ENDPOINT)"},
      {"llm_attempts", "request attempts per step"},
      {"llm_backoff_ms", "initial retry backoff in milliseconds"},
      {"llm_timeout_s", "request timeout in seconds"},
      {"llm_max_in_flight", "concurrent request ceiling"},
      {"consensus_agents", "number of voting agents"},
      {"consensus_threshold", "minimum votes to keep an entity (0: strict majority)"},
      {"consensus_mode", "per_step | final"},
      {"absent_policy", "zero | worst (contribution of unranked hard answers)"},
      {"workers", "queries executed concurrently"},
      {"cache", "reuse step results by signature"},
      {"prompt_template", "prompt asset file (default: built-in)"},
      {"trace_timing", "include wall time in trace records"},
  };
  return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "dataset") {
    dataset = value;
  } else if (key == "model") {
    model = value;
  } else if (key == "train_triples") {
    train_triples = std::string(value);
  } else if (key == "valid_triples") {
    valid_triples = std::string(value);
  } else if (key == "test_triples") {
    test_triples = std::string(value);
  } else if (key == "observed_includes_valid") {
    observed_includes_valid = parse_bool(key, value);
  } else if (key == "queries") {
    queries = std::string(value);
  } else if (key == "answers") {
    answers = std::string(value);
  } else if (key == "output_dir") {
    output_dir = std::string(value);
  } else if (key == "types") {
    std::vector<QueryType> parsed;
    std::string_view rest = value;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto tag = trim(rest.substr(0, comma));
      if (!tag.empty()) {
        try {
          parsed.push_back(parse_query_type(tag));
        } catch (const QueryError& e) {
          throw ConfigError(e.what());
        }
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (parsed.empty()) bad_value(key, value, "at least one query type");
    types = std::move(parsed);
  } else if (key == "count_per_type") {
    count_per_type = parse_uint(key, value);
  } else if (key == "seed") {
    seed = parse_uint(key, value);
  } else if (key == "retry_factor") {
    retry_factor = parse_uint(key, value);
  } else if (key == "k_hops") {
    retrieval.k_hops = parse_uint(key, value);
  } else if (key == "max_triples") {
    retrieval.max_triples =
        value == "inf" ? RetrievalConfig::kUnbounded : parse_uint(key, value);
  } else if (key == "relation_priority") {
    retrieval.relation_priority = parse_bool(key, value);
  } else if (key == "expand_intermediates") {
    retrieval.expand_intermediates = parse_bool(key, value);
  } else if (key == "backend") {
    if (value == "exact") backend = Backend::kExact;
    else if (value == "evidence") backend = Backend::kEvidence;
    else if (value == "llm") backend = Backend::kLlm;
    else if (value == "scripted") backend = Backend::kScripted;
    else bad_value(key, value, "exact, evidence, llm or scripted");
  } else if (key == "exact_graph") {
    if (value == "full") exact_over_full = true;
    else if (value == "observed") exact_over_full = false;
    else bad_value(key, value, "full or observed");
  } else if (key == "script") {
    script = std::string(value);
  } else if (key == "llm_endpoint") {
    transport.endpoint = value;
  } else if (key == "llm_attempts") {
    transport.attempts = parse_uint(key, value);
  } else if (key == "llm_backoff_ms") {
    transport.backoff = std::chrono::milliseconds(parse_uint(key, value));
  } else if (key == "llm_timeout_s") {
    transport.timeout = std::chrono::seconds(parse_uint(key, value));
  } else if (key == "llm_max_in_flight") {
    transport.max_in_flight = parse_uint(key, value);
  } else if (key == "consensus_agents") {
    consensus.agents = parse_uint(key, value);
  } else if (key == "consensus_threshold") {
    consensus.threshold = parse_uint(key, value);
  } else if (key == "consensus_mode") {
    if (value == "per_step") consensus.mode = ConsensusConfig::Mode::kPerStep;
    else if (value == "final") consensus.mode = ConsensusConfig::Mode::kFinalOnly;
    else bad_value(key, value, "per_step or final");
  } else if (key == "absent_policy") {
    if (value == "zero") absent_policy = AbsentPolicy::kZero;
    else if (value == "worst") absent_policy = AbsentPolicy::kWorstRank;
    else bad_value(key, value, "zero or worst");
  } else if (key == "workers") {
    workers = parse_uint(key, value);
  } else if (key == "cache") {
    cache = parse_bool(key, value);
  } else if (key == "prompt_template") {
    prompt_template = std::string(value);
  } else if (key == "trace_timing") {
    trace_timing = parse_bool(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

void RunConfig::load_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    auto eq = content.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(number) +
                        ": expected key = value");
    }
    try {
      set(trim(content.substr(0, eq)), content.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(number) + ": " +
                        e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  load_text(buffer.str(), path.string());
}

void RunConfig::validate() const {
  retrieval.validate();
  consensus.validate();
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (retry_factor == 0) throw ConfigError("retry_factor must be at least 1");
  if (backend == Backend::kScripted && script.empty()) {
    throw ConfigError("scripted backend needs a script file");
  }
  if (backend == Backend::kLlm) {
    TransportConfig resolved = transport;
    resolved.apply_environment();
    resolved.validate();
  }
}

std::string RunConfig::report_model() const {
  if (!model.empty()) return model;
  std::string name(to_string(backend));
  if (consensus.agents > 1) name += "x" + std::to_string(consensus.agents);
  return name;
}

}  // namespace kgqe
