#pragma once

#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/eval.hpp"
#include "alignkit/llm_client.hpp"
#include "alignkit/squad.hpp"

namespace alignkit::backends {

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(what) {}
};

namespace detail {

inline nlohmann::json post_or_throw(const std::string& endpoint,
                                    const nlohmann::json& body, int timeout_ms) {
  const auto outcome = llm::detail::post_json(endpoint, body, "", timeout_ms);
  if (outcome.transport_failed) {
    throw BackendError("transport failure for " + endpoint + ": " +
                       outcome.transport_message);
  }
  if (outcome.status != 200) {
    throw BackendError(endpoint + " returned status " + std::to_string(outcome.status));
  }
  try {
    return nlohmann::json::parse(outcome.body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(endpoint + " returned malformed JSON: " + std::string(e.what()));
  }
}

}  // namespace detail

// POST {"input","response"} -> {"score": float}
class HttpInspectorBackend : public squad::InspectorBackend {
 public:
  explicit HttpInspectorBackend(std::string endpoint, int timeout_ms = 120000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  double score(const std::string& input, const std::string& response) override {
    const auto reply = detail::post_or_throw(
        endpoint_, {{"input", input}, {"response", response}}, timeout_ms_);
    if (!reply.contains("score")) throw BackendError(endpoint_ + ": reply has no score");
    return reply["score"].get<double>();
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

// POST {"input","response"} -> {"aligned_response": string}
class HttpAlignerBackend : public squad::AlignerBackend {
 public:
  explicit HttpAlignerBackend(std::string endpoint, int timeout_ms = 120000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::string align(const std::string& input, const std::string& response) override {
    const auto reply = detail::post_or_throw(
        endpoint_, {{"input", input}, {"response", response}}, timeout_ms_);
    if (!reply.contains("aligned_response")) {
      throw BackendError(endpoint_ + ": reply has no aligned_response");
    }
    return reply["aligned_response"].get<std::string>();
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

// Scalar-scoring judge: each response scored independently via
// POST {"input","response"} -> {"score"}. Order-independent by nature.
class ScalarHttpJudge : public eval::JudgeBackend {
 public:
  explicit ScalarHttpJudge(std::string endpoint, int timeout_ms = 120000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::string name() const override { return "scalar-http(" + endpoint_ + ")"; }

  std::pair<double, double> score_pair(const std::string& input, const std::string& first,
                                       const std::string& second) override {
    return {score_one(input, first), score_one(input, second)};
  }

 private:
  double score_one(const std::string& input, const std::string& response) {
    const auto reply = detail::post_or_throw(
        endpoint_, {{"input", input}, {"response", response}}, timeout_ms_);
    if (!reply.contains("score")) throw BackendError(endpoint_ + ": reply has no score");
    return reply["score"].get<double>();
  }

  std::string endpoint_;
  int timeout_ms_;
};

// Pairwise-preference judge for comparators that never emit scalars:
// POST {"input","response_a","response_b"} -> {"preferred": "a"|"b"|"tie"}.
// Verdicts are mapped onto 1/0 and 0.5/0.5 sentinel scores; the judge name
// carries a [preference] flag so consumers know the scores are sentinels.
class PairwiseHttpJudge : public eval::JudgeBackend {
 public:
  explicit PairwiseHttpJudge(std::string endpoint, int timeout_ms = 120000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::string name() const override {
    return "pairwise-http(" + endpoint_ + ")[preference]";
  }

  std::pair<double, double> score_pair(const std::string& input, const std::string& first,
                                       const std::string& second) override {
    const auto reply = detail::post_or_throw(
        endpoint_,
        {{"input", input}, {"response_a", first}, {"response_b", second}}, timeout_ms_);
    const std::string preferred = reply.value("preferred", std::string());
    if (preferred == "a") return {1.0, 0.0};
    if (preferred == "b") return {0.0, 1.0};
    if (preferred == "tie") return {0.5, 0.5};
    throw BackendError(endpoint_ + ": unknown preference '" + preferred + "'");
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

}  // namespace alignkit::backends
