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

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>

#include "kgqe/execution.hpp"

namespace kgqe {

// Caps concurrent requests across every answerer sharing the limiter.
class RequestLimiter {
 public:
  explicit RequestLimiter(std::size_t max_in_flight);

  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t available_;
};

struct TransportConfig {
  // http(s)://host[:port][/path]
  std::string endpoint;
  std::string token;
  std::size_t attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failure
  std::chrono::seconds timeout{120};
  std::size_t max_in_flight = 4;

  // Fills endpoint and token from ROG_LLM_ENDPOINT / ROG_LLM_TOKEN where the
  // fields are empty.
  void apply_environment();
  // Throws ConfigError when no endpoint is set or it cannot be parsed.
  void validate() const;
};

// Sends {"prompt": ...} and expects {"text": ...}. Transport failures and
// non-2xx statuses are retried; a malformed envelope is not.
class RemoteLlmAnswerer final : public Answerer {
 public:
  RemoteLlmAnswerer(TransportConfig config, std::size_t entity_count,
                    std::shared_ptr<RequestLimiter> limiter = nullptr);
  ~RemoteLlmAnswerer() override;

  std::string name() const override { return "llm"; }
  bool consumes_evidence() const override { return true; }
  AnswerList answer_step(const StepRequest& request) override;

  // Raw completion text for one prompt. Throws TransportError.
  std::string complete(const std::string& prompt, std::size_t step_index);

 private:
  struct Connection;

  TransportConfig config_;
  std::size_t entity_count_;
  std::shared_ptr<RequestLimiter> limiter_;
  std::unique_ptr<Connection> connection_;
};

// Parses model text into an answer list; labels outside the graph's entity
// range are dropped and counted as violations.
AnswerList answer_from_text(std::string_view text, std::size_t entity_count,
                            std::string provenance);

}  // namespace kgqe
