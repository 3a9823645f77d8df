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

// kgqe: batch front end. Every subcommand reads the same key=value run
// configuration; any key can be overridden with --<key> on the command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgqe/config.hpp"
#include "kgqe/error.hpp"
#include "kgqe/evidence.hpp"
#include "kgqe/pipeline.hpp"
#include "kgqe/plan.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kgqe::ConfigError("cannot write " + path.string());
  out << content;
}

std::string summary(const kgqe::KnowledgeGraph& g) {
  return std::to_string(g.entity_count()) + " entities, " +
         std::to_string(g.relation_count()) + " relations, " +
         std::to_string(g.triple_count()) + " triples";
}

int cmd_ingest(const kgqe::RunConfig& config) {
  auto split = kgqe::load_split(config);
  std::cout << "full: " << summary(split.full) << "\n";
  std::cout << "observed: " << summary(split.observed) << "\n";
  std::ostringstream map;
  split.names->write(map);
  fs::path path = config.output_dir / "abstraction.tsv";
  write_file(path, map.str());
  std::cout << "abstraction map: " << path.string() << "\n";
  return kExitOk;
}

int cmd_gen_queries(const kgqe::RunConfig& config) {
  if (config.queries.empty() || config.answers.empty()) {
    throw kgqe::ConfigError("gen-queries needs both queries and answers paths");
  }
  auto split = kgqe::load_split(config);
  auto instances = kgqe::generate_all(split, config);
  std::ostringstream queries;
  std::ostringstream answers;
  kgqe::write_query_file(queries, instances);
  kgqe::write_answer_file(answers, instances);
  write_file(config.queries, queries.str());
  write_file(config.answers, answers.str());
  std::cout << "wrote " << instances.size() << " queries to " << config.queries.string()
            << "\n";
  return kExitOk;
}

int cmd_compile(const kgqe::RunConfig& config, const std::string& records_path) {
  auto instances = kgqe::load_queries(config, false);
  std::string records;
  for (const auto& instance : instances) {
    auto plan = kgqe::compile(instance.query);
    std::cout << "== " << instance.id << " (" << kgqe::to_string(instance.type) << ")\n"
              << kgqe::pretty_print(plan);
    std::istringstream lines(kgqe::plan_records(plan));
    for (std::string line; std::getline(lines, line);) {
      auto record = nlohmann::json::parse(line);
      record["query"] = instance.id;
      records += record.dump() + "\n";
    }
  }
  if (!records_path.empty()) write_file(records_path, records);
  return kExitOk;
}

int cmd_run(const kgqe::RunConfig& config) {
  config.validate();
  auto split = kgqe::load_split(config);
  auto instances = kgqe::load_queries(config, false);
  auto batch = kgqe::run_batch(instances, split, config);

  write_file(config.output_dir / "answers_raw.jsonl", kgqe::raw_answer_records(batch));
  write_file(config.output_dir / "traces.jsonl",
             kgqe::batch_trace_records(batch, config.trace_timing));
  std::string template_hash = kgqe::PromptTemplate::builtin().hash();
  if (!config.prompt_template.empty()) {
    std::ifstream in(config.prompt_template);
    std::stringstream buffer;
    buffer << in.rdbuf();
    template_hash = kgqe::PromptTemplate::parse(buffer.str()).hash();
  }
  nlohmann::json run_summary = {
      {"backend", std::string(kgqe::to_string(config.backend))},
      {"model", config.report_model()},
      {"queries", batch.outcomes.size()},
      {"failed", batch.failed},
      {"prompt_template_sha256", template_hash},
      {"k_hops", config.retrieval.k_hops},
      {"max_triples", config.retrieval.max_triples == kgqe::RetrievalConfig::kUnbounded
                          ? nlohmann::json("inf")
                          : nlohmann::json(config.retrieval.max_triples)},
      {"consensus_agents", config.consensus.agents},
  };
  write_file(config.output_dir / "run_summary.json", run_summary.dump(2) + "\n");

  for (const auto& o : batch.outcomes) {
    if (!o.ok) std::cerr << "query " << o.id << " failed: " << o.error << "\n";
  }
  std::cout << "ran " << batch.outcomes.size() << " queries, " << batch.failed
            << " failed; outputs in " << config.output_dir.string() << "\n";
  return batch.failed == 0 ? kExitOk : kExitPartial;
}

int cmd_eval(const kgqe::RunConfig& config, const std::string& raw_path) {
  auto instances = kgqe::load_queries(config, true);
  fs::path raw = raw_path.empty() ? config.output_dir / "answers_raw.jsonl" : fs::path(raw_path);
  std::ifstream in(raw);
  if (!in) throw kgqe::ConfigError("cannot open raw answers " + raw.string());
  auto answers = kgqe::read_raw_answers(in);

  std::size_t entity_count = 0;
  if (!config.train_triples.empty()) {
    entity_count = kgqe::load_split(config).full.entity_count();
  } else if (config.absent_policy == kgqe::AbsentPolicy::kWorstRank) {
    throw kgqe::ConfigError("absent_policy=worst needs train_triples for the entity count");
  }
  auto report = kgqe::evaluate(instances, answers, config, entity_count);
  std::vector<kgqe::MrrReport> rows{report};
  std::string table = kgqe::render_report(rows);
  std::cout << table;
  write_file(config.output_dir / "report.txt", table);
  write_file(config.output_dir / "report.jsonl", kgqe::report_records(report));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-wise logical query answering over knowledge graphs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("-c,--config", config_path, "run configuration (key = value lines)")
      ->check(CLI::ExistingFile);

  // Flags override file values; collected here and applied after the file.
  std::map<std::string, std::string> overrides;
  for (const auto& key : kgqe::RunConfig::keys()) {
    std::string flag(key.name);
    std::replace(flag.begin(), flag.end(), '_', '-');
    app.add_option_function<std::string>(
           "--" + flag,
           [&overrides, name = std::string(key.name)](const std::string& value) {
             overrides[name] = value;
           },
           std::string(key.help))
        ->group("Configuration");
  }

  auto* ingest = app.add_subcommand("ingest", "load triple files and write the abstraction map");
  auto* gen = app.add_subcommand("gen-queries", "sample query and answer files");
  auto* compile = app.add_subcommand("compile", "print execution plans for a query file");
  std::string records_path;
  compile->add_option("--records", records_path, "also write one JSON record per step");
  auto* run = app.add_subcommand("run", "execute every query through the selected backend");
  auto* eval = app.add_subcommand("eval", "score raw answers with filtered MRR");
  std::string raw_path;
  eval->add_option("--raw", raw_path, "raw answer file (default: output_dir/answers_raw.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    kgqe::RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& [key, value] : overrides) config.set(key, value);

    if (*ingest) return cmd_ingest(config);
    if (*gen) return cmd_gen_queries(config);
    if (*compile) return cmd_compile(config, records_path);
    if (*run) return cmd_run(config);
    if (*eval) return cmd_eval(config, raw_path);
  } catch (const kgqe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
