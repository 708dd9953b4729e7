#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/squad.hpp"

namespace alignkit::eval {

enum class Verdict { a_wins, b_wins, tie };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::a_wins: return "a_wins";
    case Verdict::b_wins: return "b_wins";
    case Verdict::tie: return "tie";
  }
  throw ContractError("unknown verdict");
}

struct JudgedPair {
  std::string input;
  std::string response_a;
  std::string response_b;
  double score_a = 0.0;
  double score_b = 0.0;
  Verdict verdict = Verdict::tie;
  std::string judge_name;
  std::optional<std::string> category;
};

// A judge scores a pair in presentation order (first, second); position
// bias, if any, lives in the backend and is cancelled by judging both
// orders.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string name() const = 0;
  virtual std::pair<double, double> score_pair(const std::string& input,
                                               const std::string& first,
                                               const std::string& second) = 0;
};

// Deterministic rubric stub: longer responses score higher.
class LengthJudge : public JudgeBackend {
 public:
  std::string name() const override { return "length-stub"; }
  std::pair<double, double> score_pair(const std::string&, const std::string& first,
                                       const std::string& second) override {
    return {static_cast<double>(first.size()), static_cast<double>(second.size())};
  }
};

class JudgingError : public Error {
 public:
  explicit JudgingError(const std::string& what) : Error(what) {}
};

// Scores both responses; with swap mitigation each response is scored in
// both presentation orders and the two scores averaged before the verdict.
inline JudgedPair judge_pair(JudgeBackend& judge, const std::string& input,
                             const std::string& y_aligned,
                             const std::string& y_baseline, bool swap_mitigation,
                             std::optional<std::string> category = std::nullopt) {
  double score_a = 0.0;
  double score_b = 0.0;
  try {
    const auto [a1, b1] = judge.score_pair(input, y_aligned, y_baseline);
    if (swap_mitigation) {
      const auto [b2, a2] = judge.score_pair(input, y_baseline, y_aligned);
      score_a = 0.5 * (a1 + a2);
      score_b = 0.5 * (b1 + b2);
    } else {
      score_a = a1;
      score_b = b1;
    }
  } catch (const std::exception& e) {
    throw JudgingError(std::string("judge '") + judge.name() + "' failed: " + e.what());
  }
  JudgedPair pair;
  pair.input = input;
  pair.response_a = y_aligned;
  pair.response_b = y_baseline;
  pair.score_a = score_a;
  pair.score_b = score_b;
  pair.verdict = score_a > score_b   ? Verdict::a_wins
                 : score_b > score_a ? Verdict::b_wins
                                     : Verdict::tie;
  pair.judge_name = judge.name();
  pair.category = std::move(category);
  return pair;
}

struct CategoryStat {
  std::size_t n = 0;
  double win_rate = 0.0;
};

struct WinRateReport {
  std::size_t n = 0;
  double win_rate = 0.0;
  double tie_rate = 0.0;
  double loss_rate = 0.0;
  std::map<std::string, CategoryStat> per_category;
  bool highlight = false;  // win_rate >= 0.5, the paper's bolding convention
};

// Win Rate counts strict wins; ties are reported separately so the three
// rates always account for every pair.
inline WinRateReport win_rate(const std::vector<JudgedPair>& pairs) {
  if (pairs.empty()) throw ContractError("win_rate: empty pair list");
  WinRateReport report;
  report.n = pairs.size();
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_category;  // n, wins
  for (const auto& pair : pairs) {
    switch (pair.verdict) {
      case Verdict::a_wins: ++wins; break;
      case Verdict::tie: ++ties; break;
      case Verdict::b_wins: ++losses; break;
    }
    if (pair.category) {
      auto& [n, w] = by_category[*pair.category];
      ++n;
      if (pair.verdict == Verdict::a_wins) ++w;
    }
  }
  const double n = static_cast<double>(report.n);
  report.win_rate = static_cast<double>(wins) / n;
  report.tie_rate = static_cast<double>(ties) / n;
  report.loss_rate = static_cast<double>(losses) / n;
  report.highlight = report.win_rate >= 0.5;
  for (const auto& [name, stat] : by_category) {
    report.per_category[name] = CategoryStat{
        stat.first, static_cast<double>(stat.second) / static_cast<double>(stat.first)};
  }
  return report;
}

inline std::string normalize_category(const std::string& label) {
  std::string out;
  bool pending_space = false;
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending_space = true;
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

// Keeps pairs whose normalized category matches one of the given labels.
// Pairs without a category never match.
inline std::vector<JudgedPair> category_filter(const std::vector<JudgedPair>& pairs,
                                               const std::vector<std::string>& categories) {
  std::vector<std::string> wanted;
  wanted.reserve(categories.size());
  for (const auto& c : categories) wanted.push_back(normalize_category(c));
  std::vector<JudgedPair> kept;
  for (const auto& pair : pairs) {
    if (!pair.category) continue;
    const auto normalized = normalize_category(*pair.category);
    if (std::find(wanted.begin(), wanted.end(), normalized) != wanted.end()) {
      kept.push_back(pair);
    }
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Inspector-score distributions across squad stages
// ---------------------------------------------------------------------------

constexpr std::size_t kScoreBins = 10;

struct StageHistogram {
  std::array<std::size_t, kScoreBins> counts{};
};

struct ScoreDistributionReport {
  // stage 0: initial scores; stage 1: after the first applied event (items
  // with no applications contribute their initial score); stage 2: final.
  std::map<std::string, std::array<StageHistogram, 3>> per_criterion;
  std::size_t n_items = 0;
};

inline std::size_t score_bin(double score) {
  auto bin = static_cast<long>(score * 10.0);
  if (bin < 0) bin = 0;
  if (bin > 9) bin = 9;
  return static_cast<std::size_t>(bin);
}

inline ScoreDistributionReport score_distribution(
    const std::vector<squad::SquadTrace>& traces) {
  if (traces.empty()) throw ContractError("score_distribution: empty trace list");
  ScoreDistributionReport report;
  report.n_items = traces.size();
  for (const auto& trace : traces) {
    const squad::ScoreMap* after_first = &trace.initial_scores;
    for (const auto& event : trace.events) {
      if (event.decision == squad::Decision::applied) {
        after_first = &event.scores;
        break;
      }
    }
    const squad::ScoreMap* final_scores =
        trace.events.empty() ? &trace.initial_scores : &trace.events.back().scores;
    const std::array<const squad::ScoreMap*, 3> stages{&trace.initial_scores,
                                                       after_first, final_scores};
    for (std::size_t stage = 0; stage < stages.size(); ++stage) {
      for (const auto& [name, score] : *stages[stage]) {
        report.per_criterion[name][stage].counts[score_bin(score)] += 1;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const JudgedPair& p) {
  j = nlohmann::json{{"input", p.input},
                     {"response_a", p.response_a},
                     {"response_b", p.response_b},
                     {"score_a", p.score_a},
                     {"score_b", p.score_b},
                     {"verdict", to_string(p.verdict)},
                     {"judge_name", p.judge_name}};
  if (p.category) j["category"] = *p.category;
}

inline void to_json(nlohmann::json& j, const WinRateReport& r) {
  nlohmann::json categories = nlohmann::json::object();
  for (const auto& [name, stat] : r.per_category) {
    categories[name] = {{"n", stat.n}, {"win_rate", stat.win_rate}};
  }
  j = nlohmann::json{{"n", r.n},
                     {"win_rate", r.win_rate},
                     {"tie_rate", r.tie_rate},
                     {"loss_rate", r.loss_rate},
                     {"per_category", std::move(categories)},
                     {"highlight", r.highlight}};
}

inline void to_json(nlohmann::json& j, const ScoreDistributionReport& r) {
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t i = 0; i <= kScoreBins; ++i) {
    edges.push_back(static_cast<double>(i) / 10.0);
  }
  nlohmann::json criteria = nlohmann::json::object();
  static const char* stage_names[3] = {"misaligned", "after_first_aligner", "after_squad"};
  for (const auto& [name, stages] : r.per_criterion) {
    nlohmann::json entry = nlohmann::json::object();
    for (std::size_t s = 0; s < 3; ++s) {
      entry[stage_names[s]] = stages[s].counts;
    }
    criteria[name] = std::move(entry);
  }
  j = nlohmann::json{{"bin_edges", std::move(edges)},
                     {"n_items", r.n_items},
                     {"per_criterion", std::move(criteria)}};
}

inline std::string score_distribution_csv(const ScoreDistributionReport& r) {
  static const char* stage_names[3] = {"misaligned", "after_first_aligner", "after_squad"};
  std::ostringstream out;
  out << "criterion,stage,bin_lo,bin_hi,count\n";
  for (const auto& [name, stages] : r.per_criterion) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t b = 0; b < kScoreBins; ++b) {
        out << name << ',' << stage_names[s] << ',' << (static_cast<double>(b) / 10.0)
            << ',' << (static_cast<double>(b + 1) / 10.0) << ',' << stages[s].counts[b]
            << '\n';
      }
    }
  }
  return out.str();
}

namespace detail {
inline std::string format_rate(double rate, bool bold) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  out << rate;
  return bold ? "**" + out.str() + "**" : out.str();
}
}  // namespace detail

// Plain-text table; win rates at or above 0.5 are bolded, mirroring the
// reporting convention for "aligned response preferred".
inline std::string render_win_rate_table(const WinRateReport& report,
                                         const std::string& judge_name) {
  std::ostringstream out;
  out << "judge: " << judge_name << "  pairs: " << report.n << "\n";
  out << "metric      value\n";
  out << "win_rate    " << detail::format_rate(report.win_rate, report.highlight) << "\n";
  out << "tie_rate    " << detail::format_rate(report.tie_rate, false) << "\n";
  out << "loss_rate   " << detail::format_rate(report.loss_rate, false) << "\n";
  if (!report.per_category.empty()) {
    out << "\ncategory win rates:\n";
    for (const auto& [name, stat] : report.per_category) {
      out << "  " << name << " (n=" << stat.n << "): "
          << detail::format_rate(stat.win_rate, stat.win_rate >= 0.5) << "\n";
    }
  }
  return out.str();
}

}  // namespace alignkit::eval
