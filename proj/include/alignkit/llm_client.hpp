#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/rng.hpp"

namespace alignkit::llm {

struct GenerationParams {
  int max_new_tokens = 300;
  double repetition_penalty = 1.0;
  std::vector<std::string> stop_sequences;
  double temperature = 1.0;
};

inline void to_json(nlohmann::json& j, const GenerationParams& p) {
  j = nlohmann::json{{"max_new_tokens", p.max_new_tokens},
                     {"repetition_penalty", p.repetition_penalty},
                     {"stop_sequences", p.stop_sequences},
                     {"temperature", p.temperature}};
}

inline void from_json(const nlohmann::json& j, GenerationParams& p) {
  j.at("max_new_tokens").get_to(p.max_new_tokens);
  j.at("repetition_penalty").get_to(p.repetition_penalty);
  j.at("stop_sequences").get_to(p.stop_sequences);
  j.at("temperature").get_to(p.temperature);
}

struct CompletionRequest {
  std::string prompt;
  GenerationParams params;
  std::string model_name;
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/completions
  std::string api_key;   // optional bearer token
  int timeout_ms = 120000;
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  throw ContractError("unknown finish reason");
}

struct CompletionResult {
  std::string text;  // never contains a configured stop sequence
  FinishReason finish_reason = FinishReason::error;
  long latency_ms = 0;
  int attempt_count = 1;
};

struct RetryPolicy {
  int max_attempts = 5;
  int base_backoff_ms = 500;
  double multiplier = 2.0;
  bool jitter = true;
  std::uint64_t jitter_seed = 0x5eedULL;
};

// Retries were exhausted; what() summarizes, attempts() itemizes.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::vector<std::string> attempts)
      : Error(what), attempts_(std::move(attempts)) {}
  const std::vector<std::string>& attempts() const { return attempts_; }

 private:
  std::vector<std::string> attempts_;
};

// Non-retryable failure (4xx other than 429, malformed response body).
class PermanentError : public Error {
 public:
  PermanentError(const std::string& what, int status)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_ = 0;
};

// Pre-jitter backoff for the given 1-based attempt: base * multiplier^(n-1).
// Nondecreasing in the attempt index.
inline double backoff_delay_ms(const RetryPolicy& policy, int attempt) {
  if (attempt < 1) throw ContractError("backoff_delay_ms: attempt is 1-based");
  double delay = policy.base_backoff_ms;
  for (int i = 1; i < attempt; ++i) delay *= policy.multiplier;
  return delay;
}

// Cuts at the earliest occurrence of any stop sequence. The prefix before
// the earliest start cannot contain a full occurrence of any stop, so one
// pass suffices and the operation is idempotent.
inline std::string truncate_at_stop(std::string text,
                                    std::span<const std::string> stop_sequences) {
  std::size_t cut = std::string::npos;
  for (const auto& stop : stop_sequences) {
    if (stop.empty()) continue;
    const auto pos = text.find(stop);
    if (pos != std::string::npos && pos < cut) cut = pos;
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

// Append-only request/response mirror, one JSON object per line.
class AuditLog {
 public:
  explicit AuditLog(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw ConfigError("cannot open audit log: " + path);
  }
  void record(const nlohmann::json& entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << entry.dump() << "\n";
    out_.flush();
  }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

namespace detail {

struct ParsedEndpoint {
  std::string base;  // scheme://host:port
  std::string path;  // leading slash
};

inline ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must include a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

struct HttpOutcome {
  bool transport_failed = false;
  std::string transport_message;
  int status = 0;
  std::string body;
};

inline HttpOutcome post_json(const std::string& endpoint, const nlohmann::json& body,
                             const std::string& api_key, int timeout_ms) {
  const auto parsed = parse_endpoint(endpoint);
  httplib::Client client(parsed.base);
  client.set_connection_timeout(0, timeout_ms * 1000LL);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(parsed.path, headers, body.dump(), "application/json");
  if (!res) {
    return HttpOutcome{true, httplib::to_string(res.error()), 0, ""};
  }
  return HttpOutcome{false, "", res->status, res->body};
}

}  // namespace detail

// One completion call with retry. Transport errors, 429 and 5xx retry with
// exponential backoff (full jitter); other 4xx and malformed bodies fail
// immediately. The returned text is truncated at the first stop sequence
// even when the server already stopped.
inline CompletionResult complete(const CompletionRequest& request,
                                 const RetryPolicy& policy = {},
                                 AuditLog* audit = nullptr) {
  if (request.prompt.empty()) throw ContractError("complete: prompt must be nonempty");
  if (policy.max_attempts < 1) throw ContractError("complete: max_attempts must be >= 1");

  const nlohmann::json body{{"model", request.model_name},
                            {"prompt", request.prompt},
                            {"max_tokens", request.params.max_new_tokens},
                            {"temperature", request.params.temperature},
                            {"repetition_penalty", request.params.repetition_penalty},
                            {"stop", request.params.stop_sequences}};

  Rng jitter_rng(policy.jitter_seed);
  std::vector<std::string> attempt_history;
  const auto started = std::chrono::steady_clock::now();

  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempt > 1) {
      double delay = backoff_delay_ms(policy, attempt - 1);
      if (policy.jitter) delay *= jitter_rng.uniform();
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long long>(delay)));
    }
    const auto outcome =
        detail::post_json(request.endpoint, body, request.api_key, request.timeout_ms);
    if (audit) {
      audit->record({{"endpoint", request.endpoint},
                     {"attempt", attempt},
                     {"request", body},
                     {"status", outcome.status},
                     {"transport_error", outcome.transport_message}});
    }
    if (outcome.transport_failed) {
      attempt_history.push_back("attempt " + std::to_string(attempt) +
                                ": transport: " + outcome.transport_message);
      continue;
    }
    if (outcome.status == 429 || outcome.status >= 500) {
      attempt_history.push_back("attempt " + std::to_string(attempt) + ": status " +
                                std::to_string(outcome.status));
      continue;
    }
    if (outcome.status != 200) {
      throw PermanentError("completion endpoint returned status " +
                               std::to_string(outcome.status),
                           outcome.status);
    }

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(outcome.body);
    } catch (const nlohmann::json::exception& e) {
      throw PermanentError(std::string("malformed completion response: ") + e.what(), 200);
    }
    if (!parsed.contains("choices") || parsed["choices"].empty()) {
      throw PermanentError("completion response has no choices", 200);
    }
    const auto& choice = parsed["choices"][0];

    CompletionResult result;
    const std::string raw = choice.value("text", std::string());
    result.text = truncate_at_stop(raw, request.params.stop_sequences);
    const std::string server_reason = choice.value("finish_reason", std::string());
    if (result.text.size() < raw.size() || server_reason == "stop") {
      result.finish_reason = FinishReason::stop;
    } else if (server_reason == "length") {
      result.finish_reason = FinishReason::length;
    } else {
      result.finish_reason = FinishReason::error;
    }
    result.attempt_count = attempt;
    result.latency_ms = static_cast<long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started)
            .count());
    return result;
  }

  std::string summary = "completion failed after " +
                        std::to_string(policy.max_attempts) + " attempts";
  if (!attempt_history.empty()) summary += "; last: " + attempt_history.back();
  throw TransportError(summary, attempt_history);
}

// Result-or-error slot for batched completions.
struct CompletionOutcome {
  std::optional<CompletionResult> result;
  std::string error;
  bool ok() const { return result.has_value(); }
};

// Runs requests through a bounded worker pool. Output order always matches
// input order; per-request failures are isolated into their own slots.
inline std::vector<CompletionOutcome> complete_many(
    const std::vector<CompletionRequest>& requests, int concurrency_limit,
    const RetryPolicy& policy = {}, AuditLog* audit = nullptr) {
  if (concurrency_limit < 1) {
    throw ContractError("complete_many: concurrency_limit must be >= 1");
  }
  std::vector<CompletionOutcome> outcomes(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        outcomes[i].result = complete(requests[i], policy, audit);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(concurrency_limit), requests.size());
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return outcomes;
}

}  // namespace alignkit::llm
