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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "kgqe/llm.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace kgqe {

RequestLimiter::RequestLimiter(std::size_t max_in_flight)
    : available_(max_in_flight == 0 ? 1 : max_in_flight) {}

void RequestLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void RequestLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

namespace {

struct EndpointParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

std::optional<EndpointParts> split_endpoint(const std::string& endpoint) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint, m, pattern)) return std::nullopt;
  return EndpointParts{m[1].str(), m[2].matched ? m[2].str() : "/"};
}

}  // namespace

void TransportConfig::apply_environment() {
  if (endpoint.empty()) {
    if (const char* v = std::getenv("ROG_LLM_ENDPOINT")) endpoint = v;
  }
  if (token.empty()) {
    if (const char* v = std::getenv("ROG_LLM_TOKEN")) token = v;
  }
}

void TransportConfig::validate() const {
  if (endpoint.empty()) {
    throw ConfigError("llm backend needs an endpoint (llm_endpoint or ROG_LLM_ENDPOINT)");
  }
  if (!split_endpoint(endpoint)) {
    throw ConfigError("llm endpoint '" + endpoint + "' is not an http(s) URL");
  }
  if (attempts == 0) throw ConfigError("llm attempts must be at least 1");
}

struct RemoteLlmAnswerer::Connection {
  explicit Connection(const EndpointParts& parts) : client(parts.origin), path(parts.path) {}

  httplib::Client client;
  std::string path;
};

RemoteLlmAnswerer::RemoteLlmAnswerer(TransportConfig config, std::size_t entity_count,
                                     std::shared_ptr<RequestLimiter> limiter)
    : config_(std::move(config)),
      entity_count_(entity_count),
      limiter_(limiter ? std::move(limiter)
                       : std::make_shared<RequestLimiter>(config_.max_in_flight)) {
  config_.validate();
  connection_ = std::make_unique<Connection>(*split_endpoint(config_.endpoint));
  auto& client = connection_->client;
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  if (!config_.token.empty()) client.set_bearer_token_auth(config_.token);
}

RemoteLlmAnswerer::~RemoteLlmAnswerer() = default;

std::string RemoteLlmAnswerer::complete(const std::string& prompt, std::size_t step_index) {
  const std::string body = nlohmann::json{{"prompt", prompt}}.dump();
  std::string last_error;
  auto delay = config_.backoff;
  for (std::size_t attempt = 1; attempt <= config_.attempts; ++attempt) {
    httplib::Result response = [&] {
      limiter_->acquire();
      struct Release {
        RequestLimiter& limiter;
        ~Release() { limiter.release(); }
      } release{*limiter_};
      return connection_->client.Post(connection_->path, body, "application/json");
    }();
    if (!response) {
      last_error = "request failed: " + httplib::to_string(response.error());
    } else if (response->status < 200 || response->status >= 300) {
      last_error = "status " + std::to_string(response->status);
    } else {
      nlohmann::json envelope = nlohmann::json::parse(response->body, nullptr, false);
      if (envelope.is_discarded() || !envelope.is_object() || !envelope.contains("text") ||
          !envelope["text"].is_string()) {
        throw TransportError("malformed response envelope", step_index);
      }
      return envelope["text"].get<std::string>();
    }
    if (attempt < config_.attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError(last_error + " after " + std::to_string(config_.attempts) +
                           " attempts",
                       step_index);
}

AnswerList RemoteLlmAnswerer::answer_step(const StepRequest& request) {
  if (request.prompt == nullptr) {
    throw TransportError("no prompt rendered for remote backend", request.step.index);
  }
  return answer_from_text(complete(request.prompt->text, request.step.index),
                          entity_count_, name());
}

AnswerList answer_from_text(std::string_view text, std::size_t entity_count,
                            std::string provenance) {
  auto parsed = parse_answer(text);
  AnswerList out;
  out.provenance = std::move(provenance);
  out.violations = parsed.violations;
  out.explicit_none = parsed.explicit_none;
  for (auto id : parsed.entities) {
    if (id.index() < entity_count) {
      out.entities.push_back(id);
    } else {
      ++out.violations;
    }
  }
  return out;
}

}  // namespace kgqe
