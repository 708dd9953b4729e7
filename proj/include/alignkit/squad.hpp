#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"

namespace alignkit::squad {

// Per-criterion alignment scores in [0,1], keyed by criterion name.
using ScoreMap = std::map<std::string, double>;

class InspectorBackend {
 public:
  virtual ~InspectorBackend() = default;
  virtual double score(const std::string& input, const std::string& response) = 0;
};

class AlignerBackend {
 public:
  virtual ~AlignerBackend() = default;
  virtual std::string align(const std::string& input, const std::string& response) = 0;
};

struct Criterion {
  std::string name;
  std::shared_ptr<InspectorBackend> inspector;
  std::shared_ptr<AlignerBackend> aligner;
};

struct Exchange {
  std::string input;
  std::string response;  // may be empty; an empty response is still scorable
  std::string source;
  std::string category;
};

enum class Ordering { batch_average_ascending, fixed };

struct SquadConfig {
  double threshold = 0.5;
  Ordering ordering = Ordering::batch_average_ascending;
  std::vector<std::string> fixed_order;
  int max_applications_per_criterion = 1;
};

enum class Decision { applied, skipped_above_threshold, skipped_cleared_by_earlier };

inline std::string to_string(Decision d) {
  switch (d) {
    case Decision::applied: return "applied";
    case Decision::skipped_above_threshold: return "skipped_above_threshold";
    case Decision::skipped_cleared_by_earlier: return "skipped_cleared_by_earlier";
  }
  throw ContractError("unknown decision");
}

// A backend returned a score outside [0,1]; the engine clamps and records.
struct ClampNote {
  std::string criterion;
  double raw_score = 0.0;
};

struct TraceEvent {
  std::string criterion;
  Decision decision = Decision::applied;
  ScoreMap scores;       // complete re-score after the event
  int applications = 0;  // aligner calls inside this event (0 for skips)
};

struct SquadTrace {
  ScoreMap initial_scores;
  std::vector<TraceEvent> events;
  std::string final_response;
  std::vector<ClampNote> clamps;
};

class ScoringError : public Error {
 public:
  ScoringError(std::string criterion, const std::string& cause)
      : Error("inspector '" + criterion + "' failed: " + cause),
        criterion_(std::move(criterion)) {}
  const std::string& criterion() const { return criterion_; }

 private:
  std::string criterion_;
};

class AlignmentError : public Error {
 public:
  AlignmentError(std::string criterion, const std::string& cause, SquadTrace partial)
      : Error("aligner '" + criterion + "' failed: " + cause),
        criterion_(std::move(criterion)),
        partial_trace_(std::move(partial)) {}
  const std::string& criterion() const { return criterion_; }
  const SquadTrace& partial_trace() const { return partial_trace_; }

 private:
  std::string criterion_;
  SquadTrace partial_trace_;
};

namespace detail {
inline void require_unique_names(const std::vector<Criterion>& criteria) {
  std::set<std::string> names;
  for (const auto& c : criteria) {
    if (!names.insert(c.name).second) {
      throw ContractError("duplicate criterion name: " + c.name);
    }
  }
}
}  // namespace detail

struct ScoreOutcome {
  ScoreMap scores;
  std::vector<ClampNote> clamps;
};

// Scores every criterion, all-or-nothing: any backend failure aborts the
// item rather than returning a partial map. Out-of-range finite scores are
// clamped to [0,1] and noted; non-finite scores are treated as failures.
inline ScoreOutcome score_all(const std::vector<Criterion>& criteria,
                              const Exchange& exchange) {
  detail::require_unique_names(criteria);
  ScoreOutcome outcome;
  for (const auto& criterion : criteria) {
    double raw = 0.0;
    try {
      raw = criterion.inspector->score(exchange.input, exchange.response);
    } catch (const std::exception& e) {
      throw ScoringError(criterion.name, e.what());
    }
    if (!std::isfinite(raw)) {
      throw ScoringError(criterion.name, "non-finite score");
    }
    double clamped = raw;
    if (raw < 0.0 || raw > 1.0) {
      clamped = std::clamp(raw, 0.0, 1.0);
      outcome.clamps.push_back(ClampNote{criterion.name, raw});
    }
    outcome.scores[criterion.name] = clamped;
  }
  return outcome;
}

// Batch-level aligner order: ascending mean inspector score, ties broken
// lexicographically by name. Fixed ordering returns the configured list
// verbatim.
inline std::vector<std::string> determine_order(const std::vector<ScoreMap>& batch_scores,
                                                const SquadConfig& config) {
  if (config.ordering == Ordering::fixed) return config.fixed_order;
  if (batch_scores.empty()) {
    throw ContractError("determine_order: batch-average ordering needs a nonempty batch");
  }
  std::map<std::string, double> totals;
  for (const auto& scores : batch_scores) {
    if (scores.size() != batch_scores.front().size()) {
      throw ContractError("determine_order: inconsistent score maps in batch");
    }
    for (const auto& [name, score] : scores) totals[name] += score;
  }
  std::vector<std::pair<std::string, double>> averages;
  averages.reserve(totals.size());
  for (const auto& [name, total] : totals) {
    averages.emplace_back(name, total / static_cast<double>(batch_scores.size()));
  }
  std::sort(averages.begin(), averages.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  std::vector<std::string> order;
  order.reserve(averages.size());
  for (const auto& [name, avg] : averages) order.push_back(name);
  return order;
}

// Walks the order once. At each criterion the decision reads the most
// recent ScoreMap: below threshold applies the aligner (then re-scores all
// criteria); at or above threshold records a skip, distinguishing scores
// that were already clear in the initial map from scores an earlier
// application raised.
inline std::pair<Exchange, SquadTrace> align_one(const Exchange& exchange,
                                                 const std::vector<std::string>& order,
                                                 const std::vector<Criterion>& criteria,
                                                 const SquadConfig& config,
                                                 const ScoreOutcome* initial = nullptr) {
  detail::require_unique_names(criteria);
  if (order.size() != criteria.size()) {
    throw ContractError("align_one: order must be a permutation of criterion names");
  }
  std::map<std::string, const Criterion*> by_name;
  for (const auto& c : criteria) by_name[c.name] = &c;
  for (const auto& name : order) {
    if (!by_name.count(name)) {
      throw ContractError("align_one: order names unknown criterion: " + name);
    }
  }
  if (config.max_applications_per_criterion < 1) {
    throw ContractError("align_one: max_applications_per_criterion must be >= 1");
  }

  Exchange current = exchange;
  SquadTrace trace;
  ScoreOutcome scored = initial ? *initial : score_all(criteria, current);
  trace.initial_scores = scored.scores;
  trace.clamps = scored.clamps;
  trace.final_response = current.response;

  for (const auto& name : order) {
    const double before = scored.scores.at(name);
    TraceEvent event;
    event.criterion = name;
    if (before < config.threshold) {
      int used = 0;
      while (scored.scores.at(name) < config.threshold &&
             used < config.max_applications_per_criterion) {
        std::string rewritten;
        try {
          rewritten = by_name.at(name)->aligner->align(current.input, current.response);
        } catch (const std::exception& e) {
          trace.final_response = current.response;
          throw AlignmentError(name, e.what(), trace);
        }
        current.response = std::move(rewritten);
        ScoreOutcome rescored;
        try {
          rescored = score_all(criteria, current);
        } catch (const ScoringError& e) {
          trace.final_response = current.response;
          throw AlignmentError(name, std::string("re-scoring failed: ") + e.what(), trace);
        }
        scored.scores = std::move(rescored.scores);
        for (const auto& note : rescored.clamps) trace.clamps.push_back(note);
        ++used;
      }
      event.decision = Decision::applied;
      event.applications = used;
    } else {
      event.decision = trace.initial_scores.at(name) >= config.threshold
                           ? Decision::skipped_above_threshold
                           : Decision::skipped_cleared_by_earlier;
    }
    event.scores = scored.scores;
    trace.events.push_back(std::move(event));
  }
  trace.final_response = current.response;
  return {std::move(current), std::move(trace)};
}

struct ItemFailure {
  std::size_t index = 0;
  std::string stage;  // "scoring" or "alignment"
  std::string message;
  std::optional<SquadTrace> partial_trace;
};

struct BatchResult {
  // One slot per input item, in input order; nullopt marks a failed item
  // whose details live in failures.
  std::vector<std::optional<std::pair<Exchange, SquadTrace>>> items;
  std::vector<ItemFailure> failures;
  std::vector<std::string> order;
};

// Scores the whole batch, derives a single order from the successful
// initial score maps, then aligns items independently. Per-item failures
// never abort the batch.
inline BatchResult process_batch(const std::vector<Exchange>& batch,
                                 const std::vector<Criterion>& criteria,
                                 const SquadConfig& config) {
  if (batch.empty()) throw ContractError("process_batch: empty batch");
  detail::require_unique_names(criteria);

  BatchResult result;
  result.items.resize(batch.size());
  std::vector<std::optional<ScoreOutcome>> scored(batch.size());
  std::vector<ScoreMap> for_ordering;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      scored[i] = score_all(criteria, batch[i]);
      for_ordering.push_back(scored[i]->scores);
    } catch (const ScoringError& e) {
      result.failures.push_back(ItemFailure{i, "scoring", e.what(), std::nullopt});
    }
  }
  if (for_ordering.empty()) return result;

  result.order = determine_order(for_ordering, config);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!scored[i]) continue;
    try {
      result.items[i] = align_one(batch[i], result.order, criteria, config, &*scored[i]);
    } catch (const AlignmentError& e) {
      result.failures.push_back(ItemFailure{i, "alignment", e.what(), e.partial_trace()});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Exchange& e) {
  j = nlohmann::json{{"input", e.input}, {"response", e.response}};
  if (!e.source.empty()) j["source"] = e.source;
  if (!e.category.empty()) j["category"] = e.category;
}

inline void from_json(const nlohmann::json& j, Exchange& e) {
  j.at("input").get_to(e.input);
  e.response = j.value("response", std::string());
  e.source = j.value("source", std::string());
  e.category = j.value("category", std::string());
  if (e.input.empty()) throw ContractError("Exchange: input must be nonempty");
}

inline void to_json(nlohmann::json& j, const TraceEvent& e) {
  j = nlohmann::json{{"criterion", e.criterion},
                     {"decision", to_string(e.decision)},
                     {"scores", e.scores}};
  if (e.applications > 1) j["applications"] = e.applications;
}

inline void from_json(const nlohmann::json& j, TraceEvent& e) {
  j.at("criterion").get_to(e.criterion);
  const auto d = j.at("decision").get<std::string>();
  if (d == "applied") e.decision = Decision::applied;
  else if (d == "skipped_above_threshold") e.decision = Decision::skipped_above_threshold;
  else if (d == "skipped_cleared_by_earlier") e.decision = Decision::skipped_cleared_by_earlier;
  else throw ContractError("TraceEvent: unknown decision " + d);
  j.at("scores").get_to(e.scores);
  e.applications = j.value("applications", e.decision == Decision::applied ? 1 : 0);
}

inline void to_json(nlohmann::json& j, const SquadTrace& t) {
  j = nlohmann::json{{"initial_scores", t.initial_scores},
                     {"events", t.events},
                     {"final_response", t.final_response}};
  if (!t.clamps.empty()) {
    nlohmann::json clamps = nlohmann::json::array();
    for (const auto& c : t.clamps) {
      clamps.push_back({{"criterion", c.criterion}, {"raw_score", c.raw_score}});
    }
    j["clamps"] = std::move(clamps);
  }
}

inline void from_json(const nlohmann::json& j, SquadTrace& t) {
  j.at("initial_scores").get_to(t.initial_scores);
  j.at("events").get_to(t.events);
  j.at("final_response").get_to(t.final_response);
  if (j.contains("clamps")) {
    for (const auto& c : j.at("clamps")) {
      t.clamps.push_back(ClampNote{c.at("criterion").get<std::string>(),
                                   c.at("raw_score").get<double>()});
    }
  }
}

}  // namespace alignkit::squad
