#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/llm_client.hpp"
#include "alignkit/rng.hpp"

namespace alignkit::datagen {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct QuestionSeed {
  std::string topic;
  std::string question_type;
  std::string question;
};

struct Principle {
  std::string name;         // "care"
  std::string description;  // "The response should ..."
};

struct Demonstration {
  std::string input;
  std::string response;
  std::string critique;
  std::string corrected;
};

struct PrincipleSet {
  std::string criterion;        // "ethical"
  std::string title;            // "Ethical Corrector"
  std::string section_heading;  // "Principles" or "Alignment Criteria"
  std::string intro;            // the full "You are ..." line
  std::vector<Principle> principles;
  std::vector<Demonstration> demonstrations;
  std::string role_word;  // "Corrector" or "Aligner"
};

struct Triple {
  std::string input;
  std::string misaligned;
  std::string aligned;
  std::string critique;
  std::string criterion;
};

// Raw completion preserved so the caller can quarantine it.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// Invariants are enforced at build time so rendering never has to.
inline PrincipleSet make_principle_set(PrincipleSet ps) {
  if (ps.principles.empty()) {
    throw ContractError("PrincipleSet '" + ps.criterion + "': needs at least one principle");
  }
  if (ps.demonstrations.empty()) {
    throw ContractError("PrincipleSet '" + ps.criterion + "': needs at least one demonstration");
  }
  if (ps.role_word.empty()) {
    throw ContractError("PrincipleSet '" + ps.criterion + "': role word must be nonempty");
  }
  int good_as_is = 0;
  for (const auto& demo : ps.demonstrations) {
    if (demo.corrected == demo.response) ++good_as_is;
  }
  if (good_as_is != 1) {
    throw ContractError("PrincipleSet '" + ps.criterion +
                        "': exactly one demonstration must keep the response as is, found " +
                        std::to_string(good_as_is));
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline std::string render_demonstration(const std::string& role_word,
                                        const Demonstration& demo) {
  return "Input:\n" + demo.input + "\nResponse:\n" + demo.response + "\n" +
         role_word + " (identify problems with response): \n" + demo.critique +
         "\n" + role_word + ":\n" + demo.corrected;
}

// The full principle prompt: header, numbered principles, demonstration
// blocks separated by two blank lines, trailing newline.
inline std::string render_principle_prompt(const PrincipleSet& ps) {
  std::string out = "# " + ps.title + "\n\n## " + ps.section_heading + "\n\n" +
                    ps.intro + "\n\n";
  for (std::size_t i = 0; i < ps.principles.size(); ++i) {
    out += std::to_string(i + 1) + " (" + ps.principles[i].name + "). " +
           ps.principles[i].description + "\n";
  }
  out += "\n\n## Examples\n\n";
  for (std::size_t i = 0; i < ps.demonstrations.size(); ++i) {
    if (i > 0) out += "\n\n\n";
    out += render_demonstration(ps.role_word, ps.demonstrations[i]);
  }
  out += "\n";
  return out;
}

// Principle prompt followed by a fresh input block, ending at "Response:"
// so the model's continuation is the (misaligned, critique, aligned) block.
inline std::string render_pair_prompt(const PrincipleSet& ps, const std::string& x) {
  if (x.empty()) throw ContractError("render_pair_prompt: input must be nonempty");
  return render_principle_prompt(ps) + "\n\nInput:\n" + x + "\nResponse:";
}

// Literal substitution of the i-th "{}" slot, no escaping.
inline std::string fill_placeholders(std::string tmpl,
                                     const std::vector<std::string>& values) {
  std::size_t from = 0;
  for (const auto& value : values) {
    const auto pos = tmpl.find("{}", from);
    if (pos == std::string::npos) {
      throw ContractError("template has fewer {} slots than values");
    }
    tmpl.replace(pos, 2, value);
    from = pos + value.size();
  }
  return tmpl;
}

inline std::string render_topic_prompt(const std::string& question_type,
                                       const std::string& template_text) {
  if (question_type.empty()) {
    throw ContractError("render_topic_prompt: question type must be nonempty");
  }
  return fill_placeholders(template_text, {question_type});
}

// hints: exactly 20 (question_type, topic) pairs. demonstrations: the seed
// questions plus everything generated so far.
inline std::string render_question_prompt(
    const std::vector<std::pair<std::string, std::string>>& hints,
    const std::vector<std::string>& demonstration_questions,
    const std::string& template_text) {
  if (hints.size() != 20) {
    throw ContractError("render_question_prompt: expected exactly 20 hints, got " +
                        std::to_string(hints.size()));
  }
  std::string hint_block;
  for (std::size_t i = 0; i < hints.size(); ++i) {
    if (i > 0) hint_block += "\n";
    hint_block += std::to_string(i + 1) + ". " + hints[i].first + ": " + hints[i].second;
  }
  std::string question_block;
  for (std::size_t i = 0; i < demonstration_questions.size(); ++i) {
    if (i > 0) question_block += "\n";
    question_block += std::to_string(i + 1) + ". " + demonstration_questions[i];
  }
  return fill_placeholders(template_text, {hint_block, question_block});
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string strip_carriage_returns(std::string text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    out += text[i];
  }
  return out;
}

// First occurrence of marker at a line start, at or after `from`.
inline std::size_t find_line_start(const std::string& text, const std::string& marker,
                                   std::size_t from) {
  std::size_t pos = text.find(marker, from);
  while (pos != std::string::npos) {
    if (pos == 0 || text[pos - 1] == '\n') return pos;
    pos = text.find(marker, pos + 1);
  }
  return std::string::npos;
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\n\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\n\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

// Extracts (misaligned, critique, aligned) from one model continuation.
// Markers match case-sensitively at line starts. A continuation normally
// starts right after the prompt's "Response:", so a stray "Input:" line
// means the model ran past the stop sequence and everything from there on
// is discarded. A completion that itself starts with "Input:" (a rendered
// demonstration block) keeps its own header and truncates at the second
// "Input:".
inline Triple parse_pair_completion(const std::string& completion, const std::string& x,
                                    const std::string& role_word,
                                    const std::string& criterion) {
  if (x.empty()) throw ContractError("parse_pair_completion: input x must be nonempty");
  std::string text = detail::strip_carriage_returns(completion);

  const auto head = text.find_first_not_of(" \t\n");
  const bool self_block =
      head != std::string::npos && text.compare(head, 6, "Input:") == 0 &&
      (head == 0 || text[head - 1] == '\n');

  std::size_t y_from = 0;
  if (self_block) {
    const auto stray = detail::find_line_start(text, "Input:", head + 6);
    if (stray != std::string::npos) text.resize(stray);
    const auto response_pos = detail::find_line_start(text, "Response:", head);
    if (response_pos == std::string::npos) {
      throw ParseError("missing Response: marker", completion);
    }
    y_from = response_pos + 9;
  } else {
    const auto stray = detail::find_line_start(text, "Input:", 0);
    if (stray != std::string::npos) text.resize(stray);
    const auto response_pos = detail::find_line_start(text, "Response:", 0);
    if (response_pos != std::string::npos) y_from = response_pos + 9;
  }

  const std::string critique_marker = role_word + " (identify problems with response):";
  const auto critique_pos = detail::find_line_start(text, critique_marker, y_from);
  if (critique_pos == std::string::npos) {
    throw ParseError("missing critique marker '" + critique_marker + "'", completion);
  }
  const auto critique_from = critique_pos + critique_marker.size();

  const std::string final_marker = role_word + ":";
  std::size_t final_pos = std::string::npos;
  for (auto pos = detail::find_line_start(text, final_marker, critique_from);
       pos != std::string::npos;
       pos = detail::find_line_start(text, final_marker, pos + 1)) {
    final_pos = pos;
  }
  if (final_pos == std::string::npos) {
    throw ParseError("missing final marker '" + final_marker + "'", completion);
  }

  Triple triple;
  triple.input = x;
  triple.criterion = criterion;
  triple.misaligned = detail::trim(text.substr(y_from, critique_pos - y_from));
  triple.critique = detail::trim(text.substr(critique_from, final_pos - critique_from));
  triple.aligned = detail::trim(text.substr(final_pos + final_marker.size()));
  if (triple.misaligned.empty()) {
    throw ParseError("empty misaligned response after trimming", completion);
  }
  if (triple.aligned.empty()) {
    throw ParseError("empty aligned response after trimming", completion);
  }
  return triple;
}

namespace detail {

inline std::string strip_list_numbering(std::string line) {
  const std::string trimmed = trim(line);
  std::size_t i = 0;
  while (i < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[i]))) ++i;
  if (i > 0 && i < trimmed.size() && (trimmed[i] == '.' || trimmed[i] == ')')) {
    return trim(trimmed.substr(i + 1));
  }
  if (!trimmed.empty() && (trimmed[0] == '-' || trimmed[0] == '*')) {
    return trim(trimmed.substr(1));
  }
  return trimmed;
}

inline std::size_t word_count(const std::string& s) {
  std::istringstream in(s);
  std::string word;
  std::size_t n = 0;
  while (in >> word) ++n;
  return n;
}

}  // namespace detail

// One topic per line; list numbering stripped; items over three words are
// dropped (the template caps topics at three words).
inline std::vector<std::string> parse_topic_list(const std::string& completion) {
  std::vector<std::string> topics;
  std::istringstream in(completion);
  std::string line;
  while (std::getline(in, line)) {
    const std::string topic = detail::strip_list_numbering(line);
    if (topic.empty()) continue;
    const auto words = detail::word_count(topic);
    if (words >= 1 && words <= 3) topics.push_back(topic);
  }
  return topics;
}

// Items are split on numbered markers at line starts. An item survives only
// as a single sentence: one line, ending in '?' or '.', with no interior
// sentence terminator.
inline std::vector<std::string> parse_question_list(const std::string& completion) {
  std::vector<std::string> items;
  std::istringstream in(detail::strip_carriage_returns(completion));
  std::string line;
  std::string current;
  auto flush = [&]() {
    const std::string item = detail::trim(current);
    current.clear();
    if (item.empty() || item.find('\n') != std::string::npos) return;
    const char last = item.back();
    if (last != '?' && last != '.') return;
    for (std::size_t i = 0; i + 1 < item.size(); ++i) {
      if (item[i] == '.' || item[i] == '?' || item[i] == '!') return;
    }
    items.push_back(item);
  };
  while (std::getline(in, line)) {
    const std::string trimmed = detail::trim(line);
    std::size_t digits = 0;
    while (digits < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[digits]))) {
      ++digits;
    }
    const bool starts_item =
        digits > 0 && digits < trimmed.size() && trimmed[digits] == '.';
    if (starts_item) {
      flush();
      current = detail::trim(trimmed.substr(digits + 1));
    } else if (!current.empty()) {
      current += "\n" + trimmed;
    }
  }
  flush();
  return items;
}

// ---------------------------------------------------------------------------
// Filtering and splitting
// ---------------------------------------------------------------------------

namespace detail {

inline std::set<std::string> token_set(const std::string& text) {
  std::set<std::string> tokens;
  std::string token;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!token.empty()) {
      tokens.insert(token);
      token.clear();
    }
  }
  if (!token.empty()) tokens.insert(token);
  return tokens;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  const std::size_t unioned = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unioned);
}

}  // namespace detail

// Drops exact-duplicate inputs, inputs shorter than min_len characters, and
// near-duplicates whose normalized token-set overlap (Jaccard) reaches the
// threshold. First occurrence wins; order is stable.
inline std::vector<Triple> dedupe_and_filter(const std::vector<Triple>& triples,
                                             std::size_t min_len,
                                             double similarity_threshold) {
  std::vector<Triple> kept;
  std::set<std::string> seen;
  std::vector<std::set<std::string>> kept_tokens;
  for (const auto& triple : triples) {
    if (triple.input.size() < min_len) continue;
    if (!seen.insert(triple.input).second) continue;
    const auto tokens = detail::token_set(triple.input);
    bool near_dup = false;
    for (const auto& other : kept_tokens) {
      if (detail::jaccard(tokens, other) >= similarity_threshold) {
        near_dup = true;
        break;
      }
    }
    if (near_dup) continue;
    kept.push_back(triple);
    kept_tokens.push_back(tokens);
  }
  return kept;
}

struct DatasetSplit {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Seeded shuffle then contiguous split. Sizes come from largest-remainder
// rounding so each differs from the exact fraction by at most one.
inline DatasetSplit split_dataset(const std::vector<Triple>& triples, double f_train,
                                  double f_valid, double f_test, std::uint64_t seed) {
  if (f_train <= 0.0 || f_valid <= 0.0 || f_test <= 0.0) {
    throw ContractError("split_dataset: fractions must be positive");
  }
  if (std::abs(f_train + f_valid + f_test - 1.0) > 1e-9) {
    throw ContractError("split_dataset: fractions must sum to 1");
  }
  std::vector<Triple> shuffled = triples;
  Rng rng(seed);
  rng.shuffle(shuffled);

  const double n = static_cast<double>(shuffled.size());
  const double exact[3] = {f_train * n, f_valid * n, f_test * n};
  std::size_t sizes[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(exact[i]));
    remainders[i] = exact[i] - std::floor(exact[i]);
    assigned += sizes[i];
  }
  while (assigned < shuffled.size()) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  DatasetSplit split;
  auto it = shuffled.begin();
  split.train.assign(it, it + static_cast<long>(sizes[0]));
  it += static_cast<long>(sizes[0]);
  split.valid.assign(it, it + static_cast<long>(sizes[1]));
  it += static_cast<long>(sizes[1]);
  split.test.assign(it, shuffled.end());
  return split;
}

// ---------------------------------------------------------------------------
// Per-phase generation defaults
// ---------------------------------------------------------------------------

inline llm::GenerationParams topic_generation_params() {
  llm::GenerationParams params;
  params.max_new_tokens = 300;
  params.temperature = 1.0;
  return params;
}

inline llm::GenerationParams question_generation_params() {
  return topic_generation_params();
}

inline llm::GenerationParams pair_generation_params() {
  llm::GenerationParams params;
  params.max_new_tokens = 1500;
  params.repetition_penalty = 2.0;
  params.stop_sequences = {"\n\n\nInput:"};
  params.temperature = 0.7;
  return params;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Triple& t) {
  j = nlohmann::json{{"input", t.input},
                     {"misaligned", t.misaligned},
                     {"aligned", t.aligned},
                     {"critique", t.critique},
                     {"criterion", t.criterion}};
}

inline void from_json(const nlohmann::json& j, Triple& t) {
  j.at("input").get_to(t.input);
  j.at("misaligned").get_to(t.misaligned);
  j.at("aligned").get_to(t.aligned);
  t.critique = j.value("critique", std::string());
  t.criterion = j.value("criterion", std::string());
  if (t.input.empty() || t.misaligned.empty() || t.aligned.empty()) {
    throw ContractError("Triple: input, misaligned and aligned must be nonempty");
  }
}

inline std::vector<QuestionSeed> load_question_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open question seeds: " + path);
  std::vector<QuestionSeed> seeds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    QuestionSeed seed;
    seed.topic = j.at("topic").get<std::string>();
    seed.question_type = j.at("question_type").get<std::string>();
    seed.question = j.at("question").get<std::string>();
    if (seed.topic.empty() || seed.question_type.empty() || seed.question.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty seed field");
    }
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

}  // namespace alignkit::datagen
