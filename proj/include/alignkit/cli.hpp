#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignkit/config.hpp"
#include "alignkit/datagen.hpp"
#include "alignkit/errors.hpp"
#include "alignkit/eval.hpp"
#include "alignkit/http_backends.hpp"
#include "alignkit/latent_sim.hpp"
#include "alignkit/llm_client.hpp"
#include "alignkit/ndjson.hpp"
#include "alignkit/principles.hpp"
#include "alignkit/sim_bridge.hpp"
#include "alignkit/squad.hpp"

namespace alignkit::cli {

// Exit codes: 0 success, 1 usage/config, 2 runtime failure.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

namespace detail {

inline Config load_config(const CommonOptions& common) {
  return common.config_path.empty() ? Config() : Config::load(common.config_path);
}

inline void log_verbose(const CommonOptions& common, const std::string& message) {
  if (common.verbose) std::cerr << "[alignkit] " << message << "\n";
}

inline void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Runs `fn`, mapping exceptions onto the CLI exit-code contract with a
// single-line machine-parsable error on stderr.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  CommonOptions common;
  std::string kind = "independent";
  std::uint64_t seed = 7;
  std::size_t n_eval = 100;
  std::size_t d_in = 100;
  std::size_t d_latent = 50;
  std::size_t n_train = 500;
  std::size_t sparsity = 5;
  double magnitude = 2.0;
  double noise_sigma = 0.1;
  double l1_penalty = 0.025;
  int max_sweeps = 1000;
  double tol = 1e-8;
  int boost_rounds = 200;
  double boost_learning_rate = 0.1;
  double threshold = 0.9;
  int max_steps = 5;
};

// Trains a full simulated world and runs one trajectory per evaluation
// input. Every derived seed is an explicit function of the base seed so the
// run replays exactly.
inline sim::SimWorld build_sim_world(const SimulateOptions& opts) {
  const auto scenario = sim::make_scenario(sim::scenario_kind_from_string(opts.kind),
                                           opts.d_latent, opts.sparsity,
                                           opts.magnitude, opts.seed);
  sim::SimWorld world;
  world.scenario = scenario;
  world.model_seed = opts.seed + 1;
  world.data_seed = opts.seed + 2;
  world.noise_seed = opts.seed + 3;
  world.noise_sigma = opts.noise_sigma;
  world.n_train = opts.n_train;
  world.model = sim::make_latent_model(opts.d_in, opts.d_latent, scenario, world.model_seed);

  const auto inputs = sim::generate_inputs(opts.n_train, opts.d_in, world.data_seed);
  const auto exact = sim::build_dataset(world.model, inputs);
  const auto noisy = sim::perturb_targets(exact, opts.noise_sigma, world.noise_seed);
  for (std::size_t k = 0; k < world.model.num_styles(); ++k) {
    world.aligners.push_back(
        sim::train_aligner(noisy, k, opts.l1_penalty, opts.max_sweeps, opts.tol));
    world.inspectors.push_back(sim::train_inspector(noisy, k, opts.boost_rounds,
                                                    opts.boost_learning_rate));
    world.criterion_names.push_back("style_" + std::to_string(k));
  }
  return world;
}

inline int run_simulate(const SimulateOptions& opts) {
  return detail::guarded([&]() {
    sim::scenario_kind_from_string(opts.kind);  // validate before any work
    detail::ensure_out_dir(opts.common.out_dir);
    const auto world = build_sim_world(opts);
    const auto eval_inputs =
        sim::generate_inputs(opts.n_eval, opts.d_in, opts.seed + 4);

    std::vector<nlohmann::json> trajectory_rows;
    std::vector<nlohmann::json> exchange_rows;
    std::vector<nlohmann::json> baseline_rows;
    std::size_t aligned_count = 0;
    std::size_t total_applications = 0;
    std::map<int, std::size_t> application_histogram;
    std::vector<sim::Trajectory> trajectories;
    trajectories.reserve(opts.n_eval);

    for (std::size_t i = 0; i < opts.n_eval; ++i) {
      const auto x = eval_inputs.row(i);
      const auto start = sim::content_score(world.model, x);
      const auto trajectory = sim::run_trajectory(x, start, world.aligners,
                                                  world.inspectors, opts.threshold,
                                                  opts.max_steps);
      auto scores_json = [&](const std::vector<double>& scores) {
        nlohmann::json m = nlohmann::json::object();
        for (std::size_t k = 0; k < scores.size(); ++k) {
          m[world.criterion_names[k]] = scores[k];
        }
        return m;
      };
      trajectory_rows.push_back({{"trajectory", i},
                                 {"step", 0},
                                 {"applied", nullptr},
                                 {"scores", scores_json(trajectory.initial_scores)}});
      for (std::size_t s = 0; s < trajectory.steps.size(); ++s) {
        trajectory_rows.push_back(
            {{"trajectory", i},
             {"step", s + 1},
             {"applied", world.criterion_names[static_cast<std::size_t>(
                             trajectory.steps[s].applied_criterion)]},
             {"scores", scores_json(trajectory.steps[s].scores)}});
      }
      if (trajectory.terminal_status == sim::TerminalStatus::aligned) ++aligned_count;
      total_applications += static_cast<std::size_t>(trajectory.applications());
      application_histogram[trajectory.applications()] += 1;
      trajectories.push_back(trajectory);

      const std::string x_text = sim::encode_vector(std::vector<double>(x.begin(), x.end()));
      const std::string u_text = sim::encode_vector(start);
      exchange_rows.push_back(
          {{"input", x_text}, {"response", u_text}, {"source", "sim-misaligned"}});
      baseline_rows.push_back({{"input", x_text},
                               {"response", u_text},
                               {"source", "sim-misaligned"},
                               {"category", opts.kind}});
    }

    int modal_applications = 0;
    std::size_t modal_count = 0;
    for (const auto& [applications, count] : application_histogram) {
      if (count > modal_count) {
        modal_count = count;
        modal_applications = applications;
      }
    }

    std::map<std::string, std::string> settings{
        {"command", "simulate"},
        {"kind", opts.kind},
        {"seed", std::to_string(opts.seed)},
        {"n_eval", std::to_string(opts.n_eval)},
        {"n_train", std::to_string(opts.n_train)},
        {"threshold", std::to_string(opts.threshold)},
        {"max_steps", std::to_string(opts.max_steps)},
        {"l1_penalty", std::to_string(opts.l1_penalty)},
        {"noise_sigma", std::to_string(opts.noise_sigma)}};
    const std::string hash = manifest_hash(settings);

    const auto& dir = opts.common.out_dir;
    detail::write_json_file(dir + "/world.json", world);
    ndjson::write_lines(dir + "/trajectories.ndjson", trajectory_rows);
    ndjson::write_lines(dir + "/eval_exchanges.ndjson", exchange_rows);
    ndjson::write_lines(dir + "/baseline_responses.ndjson", baseline_rows);

    nlohmann::json summary{
        {"kind", opts.kind},
        {"seed", opts.seed},
        {"n_eval", opts.n_eval},
        {"aligned_fraction",
         static_cast<double>(aligned_count) / static_cast<double>(opts.n_eval)},
        {"mean_applications",
         static_cast<double>(total_applications) / static_cast<double>(opts.n_eval)},
        {"modal_applications", modal_applications},
        {"manifest_hash", hash}};
    detail::write_json_file(dir + "/summary.json", summary);

    std::ostringstream histogram_csv;
    histogram_csv << "applications,count\n";
    for (const auto& [applications, count] : application_histogram) {
      histogram_csv << applications << ',' << count << '\n';
    }
    detail::write_text(dir + "/applications_histogram.csv", histogram_csv.str());

    // Initial vs final inspector-score distributions, one row per bin.
    std::ostringstream score_csv;
    score_csv << "criterion,stage,bin_lo,bin_hi,count\n";
    for (std::size_t k = 0; k < world.criterion_names.size(); ++k) {
      std::array<std::array<std::size_t, eval::kScoreBins>, 2> bins{};
      for (const auto& trajectory : trajectories) {
        bins[0][eval::score_bin(trajectory.initial_scores[k])] += 1;
        bins[1][eval::score_bin(trajectory.final_scores()[k])] += 1;
      }
      static const char* stages[2] = {"initial", "final"};
      for (int s = 0; s < 2; ++s) {
        for (std::size_t b = 0; b < eval::kScoreBins; ++b) {
          score_csv << world.criterion_names[k] << ',' << stages[s] << ','
                    << (static_cast<double>(b) / 10.0) << ','
                    << (static_cast<double>(b + 1) / 10.0) << ',' << bins[s][b] << '\n';
        }
      }
    }
    detail::write_text(dir + "/score_histograms.csv", score_csv.str());

    nlohmann::json manifest{{"settings", settings}, {"manifest_hash", hash},
                            {"artifacts",
                             {"world.json", "trajectories.ndjson", "eval_exchanges.ndjson",
                              "baseline_responses.ndjson", "summary.json",
                              "applications_histogram.csv", "score_histograms.csv"}}};
    detail::write_json_file(dir + "/manifest.json", manifest);

    std::cout << summary.dump() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

struct AlignOptions {
  CommonOptions common;
  std::string input_path;
};

namespace detail {

inline std::vector<squad::Criterion> criteria_from_config(const Config& config) {
  const auto names = config.get_list("criteria");
  if (names.empty()) throw ConfigError("config key 'criteria' must list criterion names");

  std::optional<sim::SimWorld> world;
  auto sim_world = [&]() -> const sim::SimWorld& {
    if (!world) {
      const auto path = config.require("sim.world");
      sim::SimWorld loaded;
      read_json_file(path).get_to(loaded);
      world = std::move(loaded);
    }
    return *world;
  };

  const int timeout_ms = static_cast<int>(config.get_int("llm.timeout_ms", 120000));
  std::vector<squad::Criterion> criteria;
  for (const auto& name : names) {
    const std::string inspector = config.require("criterion." + name + ".inspector");
    const std::string aligner = config.require("criterion." + name + ".aligner");
    squad::Criterion criterion;
    criterion.name = name;
    if (inspector == "sim" || aligner == "sim") {
      const auto& w = sim_world();
      const auto it = std::find(w.criterion_names.begin(), w.criterion_names.end(), name);
      if (it == w.criterion_names.end()) {
        throw ConfigError("criterion '" + name + "' not present in sim world");
      }
      const auto k = static_cast<std::size_t>(it - w.criterion_names.begin());
      if (inspector == "sim") {
        criterion.inspector = std::make_shared<sim::SimInspectorBackend>(w.inspectors[k]);
      }
      if (aligner == "sim") {
        criterion.aligner = std::make_shared<sim::SimAlignerBackend>(w.aligners[k]);
      }
    }
    if (!criterion.inspector) {
      criterion.inspector =
          std::make_shared<backends::HttpInspectorBackend>(inspector, timeout_ms);
    }
    if (!criterion.aligner) {
      criterion.aligner =
          std::make_shared<backends::HttpAlignerBackend>(aligner, timeout_ms);
    }
    criteria.push_back(std::move(criterion));
  }
  return criteria;
}

inline squad::SquadConfig squad_config_from(const Config& config) {
  squad::SquadConfig sc;
  sc.threshold = config.get_double("squad.threshold", 0.5);
  const std::string ordering = config.get_or("squad.ordering", "batch_average_ascending");
  if (ordering == "batch_average_ascending") {
    sc.ordering = squad::Ordering::batch_average_ascending;
  } else if (ordering == "fixed") {
    sc.ordering = squad::Ordering::fixed;
    sc.fixed_order = config.get_list("squad.fixed_order");
  } else {
    throw ConfigError("unknown squad.ordering: " + ordering);
  }
  sc.max_applications_per_criterion =
      static_cast<int>(config.get_int("squad.max_applications_per_criterion", 1));
  return sc;
}

}  // namespace detail

inline int run_align(const AlignOptions& opts) {
  return detail::guarded([&]() {
    const auto config = detail::load_config(opts.common);
    const auto criteria = detail::criteria_from_config(config);
    const auto squad_config = detail::squad_config_from(config);
    detail::ensure_out_dir(opts.common.out_dir);

    auto [exchanges, line_errors] =
        ndjson::read_file<squad::Exchange>(opts.input_path);
    for (const auto& err : line_errors) {
      std::cerr << "error: " << opts.input_path << ":" << err.line_no
                << ": skipped malformed line: " << err.message << "\n";
    }
    if (exchanges.empty()) {
      throw Error("no valid exchanges in " + opts.input_path);
    }

    const auto result = squad::process_batch(exchanges, criteria, squad_config);

    std::vector<nlohmann::json> aligned_rows;
    std::vector<nlohmann::json> trace_rows;
    std::map<std::string, std::size_t> application_counts;
    std::size_t ok = 0;
    for (const auto& item : result.items) {
      if (!item) continue;
      ++ok;
      aligned_rows.push_back(item->first);
      trace_rows.push_back(item->second);
      for (const auto& event : item->second.events) {
        if (event.decision == squad::Decision::applied) {
          application_counts[event.criterion] +=
              static_cast<std::size_t>(event.applications);
        }
      }
    }
    for (const auto& failure : result.failures) {
      std::cerr << "error: item " << failure.index << " failed during "
                << failure.stage << ": " << failure.message << "\n";
    }

    const auto& dir = opts.common.out_dir;
    ndjson::write_lines(dir + "/aligned.ndjson", aligned_rows);
    ndjson::write_lines(dir + "/traces.ndjson", trace_rows);

    std::ostringstream summary;
    summary << "items=" << exchanges.size() << " ok=" << ok
            << " failed=" << result.failures.size();
    for (const auto& criterion : criteria) {
      const auto it = application_counts.find(criterion.name);
      summary << " applied." << criterion.name << "="
              << (it == application_counts.end() ? 0 : it->second);
    }
    std::cout << summary.str() << "\n";
    return ok == 0 ? kExitRuntime : kExitOk;
  });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  CommonOptions common;
  std::string aligned_path;
  std::string baseline_path;
  std::string judge = "length";
  std::optional<std::size_t> subsample;
  std::uint64_t subsample_seed = 0;
  std::string traces_path;  // optional: emit score-distribution report
};

namespace detail {

struct EvalRecord {
  std::string input;
  std::string response;
  std::string category;
};

// Accepts either aligned-exchange records ({"input","response"}) or
// dataset triples ({"input","aligned",...}).
inline std::vector<EvalRecord> read_eval_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path);
  std::vector<EvalRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << path << ":" << line_no << ": " << e.what() << "\n";
      continue;
    }
    EvalRecord record;
    record.input = j.value("input", std::string());
    if (j.contains("response")) record.response = j["response"].get<std::string>();
    else if (j.contains("aligned")) record.response = j["aligned"].get<std::string>();
    record.category = j.value("category", std::string());
    if (record.input.empty()) {
      std::cerr << "error: " << path << ":" << line_no << ": record has no input\n";
      continue;
    }
    records.push_back(std::move(record));
  }
  return records;
}

inline std::unique_ptr<eval::JudgeBackend> make_judge(const std::string& kind,
                                                      const Config& config) {
  if (kind == "length") return std::make_unique<eval::LengthJudge>();
  const int timeout_ms = static_cast<int>(config.get_int("llm.timeout_ms", 120000));
  if (kind == "scalar_http") {
    return std::make_unique<backends::ScalarHttpJudge>(config.require("judge.endpoint"),
                                                       timeout_ms);
  }
  if (kind == "pairwise_http") {
    return std::make_unique<backends::PairwiseHttpJudge>(config.require("judge.endpoint"),
                                                         timeout_ms);
  }
  throw ConfigError("unknown judge kind: " + kind);
}

}  // namespace detail

inline int run_eval(const EvalOptions& opts) {
  return detail::guarded([&]() {
    const auto config = detail::load_config(opts.common);
    detail::ensure_out_dir(opts.common.out_dir);

    const auto aligned = detail::read_eval_records(opts.aligned_path);
    const auto baseline = detail::read_eval_records(opts.baseline_path);

    std::map<std::string, const detail::EvalRecord*> baseline_by_input;
    for (const auto& record : baseline) baseline_by_input[record.input] = &record;

    struct MatchedPair {
      const detail::EvalRecord* aligned;
      const detail::EvalRecord* baseline;
    };
    std::vector<MatchedPair> matched;
    std::vector<std::string> unmatched_aligned;
    std::set<std::string> used_inputs;
    for (const auto& record : aligned) {
      const auto it = baseline_by_input.find(record.input);
      if (it == baseline_by_input.end()) {
        unmatched_aligned.push_back(record.input);
      } else {
        matched.push_back(MatchedPair{&record, it->second});
        used_inputs.insert(record.input);
      }
    }
    std::vector<std::string> unmatched_baseline;
    for (const auto& record : baseline) {
      if (!used_inputs.count(record.input)) unmatched_baseline.push_back(record.input);
    }
    if (!unmatched_aligned.empty() || !unmatched_baseline.empty()) {
      std::cerr << "error: unmatched inputs: " << unmatched_aligned.size()
                << " aligned-only, " << unmatched_baseline.size() << " baseline-only\n";
      detail::write_json_file(opts.common.out_dir + "/unmatched.json",
                              {{"aligned_only", unmatched_aligned},
                               {"baseline_only", unmatched_baseline}});
    }
    if (matched.empty()) throw Error("zero matched input pairs between files");

    if (opts.subsample && *opts.subsample < matched.size()) {
      Rng rng(opts.subsample_seed);
      const auto picked = rng.sample_indices(matched.size(), *opts.subsample);
      std::vector<MatchedPair> sampled;
      sampled.reserve(picked.size());
      for (const auto i : picked) sampled.push_back(matched[i]);
      matched = std::move(sampled);
    }

    auto judge = detail::make_judge(opts.judge, config);
    // Position-bias mitigation defaults on for remote judges, off for the
    // deterministic stub.
    const bool swap_default = opts.judge != "length";
    const bool swap = config.get_bool("judge.swap_mitigation", swap_default);

    std::vector<eval::JudgedPair> pairs;
    pairs.reserve(matched.size());
    for (const auto& m : matched) {
      std::optional<std::string> category;
      if (!m.baseline->category.empty()) category = m.baseline->category;
      pairs.push_back(eval::judge_pair(*judge, m.aligned->input, m.aligned->response,
                                       m.baseline->response, swap, category));
    }

    const auto categories = config.get_list("eval.categories");
    const auto scored = categories.empty() ? pairs : eval::category_filter(pairs, categories);
    if (scored.empty()) throw Error("category filter removed every judged pair");
    const auto report = eval::win_rate(scored);

    const auto& dir = opts.common.out_dir;
    detail::write_json_file(dir + "/win_rate.json", report);
    ndjson::write_file(dir + "/judged_pairs.ndjson", scored);
    const auto table = eval::render_win_rate_table(report, judge->name());
    detail::write_text(dir + "/win_rate.txt", table);
    std::cout << table;

    if (!opts.traces_path.empty()) {
      auto [traces, trace_errors] =
          ndjson::read_file<squad::SquadTrace>(opts.traces_path);
      for (const auto& err : trace_errors) {
        std::cerr << "error: " << opts.traces_path << ":" << err.line_no << ": "
                  << err.message << "\n";
      }
      if (!traces.empty()) {
        const auto distribution = eval::score_distribution(traces);
        detail::write_json_file(dir + "/score_distribution.json", distribution);
        detail::write_text(dir + "/score_distribution.csv",
                           eval::score_distribution_csv(distribution));
      }
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// datagen
// ---------------------------------------------------------------------------

struct DatagenOptions {
  CommonOptions common;
  std::string criterion = "ethical";
  std::string phase = "pairs";  // topics | questions | pairs
  std::string input_path;       // pairs: inputs; questions: topics file
  int rounds = 1;               // question-generation calls
  bool dry_run = false;
};

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<std::string> read_input_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file: " + path);
  std::vector<std::string> inputs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.front() == '{') {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_discarded()) {
        if (j.contains("input")) {
          inputs.push_back(j["input"].get<std::string>());
          continue;
        }
        if (j.contains("question")) {
          inputs.push_back(j["question"].get<std::string>());
          continue;
        }
      }
    }
    inputs.push_back(line);
  }
  return inputs;
}

struct DatagenContext {
  Config config;
  std::string templates_dir;
  std::vector<datagen::QuestionSeed> seeds;
  std::string endpoint;
  std::string model;
  std::string api_key;
  int concurrency = 4;
  llm::RetryPolicy retry;
};

// Eager validation: every referenced template and fixture file must exist
// before any network call is attempted.
inline DatagenContext make_datagen_context(const DatagenOptions& opts) {
  DatagenContext ctx;
  ctx.config = load_config(opts.common);
  ctx.templates_dir = ctx.config.get_or("datagen.templates_dir", "templates");
  const std::vector<std::string> required = {
      "ethical_corrector.txt", "factuality_corrector.txt", "helpful_aligner.txt",
      "topic_generation.txt",  "question_generation.txt",  "question_seeds.jsonl"};
  for (const auto& name : required) {
    const auto path = ctx.templates_dir + "/" + name;
    if (!std::filesystem::exists(path)) {
      throw ConfigError("missing template file: " + path);
    }
  }
  ctx.seeds = datagen::load_question_seeds(ctx.templates_dir + "/question_seeds.jsonl");
  if (ctx.seeds.size() != 20) {
    throw ConfigError("question seed list must have exactly 20 entries, found " +
                      std::to_string(ctx.seeds.size()));
  }
  if (!opts.dry_run) {
    ctx.endpoint = ctx.config.require("llm.endpoint");
    ctx.model = ctx.config.get_or("llm.model", "unknown");
    ctx.api_key = ctx.config.get_or("llm.api_key", "");
  }
  ctx.concurrency = static_cast<int>(ctx.config.get_int("llm.concurrency", 4));
  ctx.retry.max_attempts = static_cast<int>(ctx.config.get_int("llm.max_attempts", 5));
  ctx.retry.base_backoff_ms =
      static_cast<int>(ctx.config.get_int("llm.base_backoff_ms", 500));
  return ctx;
}

inline llm::CompletionRequest make_request(const DatagenContext& ctx,
                                           std::string prompt,
                                           llm::GenerationParams params) {
  llm::CompletionRequest request;
  request.prompt = std::move(prompt);
  request.params = std::move(params);
  request.model_name = ctx.model;
  request.endpoint = ctx.endpoint;
  request.api_key = ctx.api_key;
  request.timeout_ms = static_cast<int>(ctx.config.get_int("llm.timeout_ms", 120000));
  return request;
}

inline nlohmann::json datagen_manifest(const DatagenOptions& opts,
                                       const DatagenContext& ctx,
                                       const llm::GenerationParams& params,
                                       std::size_t requested, std::size_t generated,
                                       std::size_t parsed, std::size_t quarantined) {
  std::map<std::string, std::string> settings{
      {"command", "datagen"},
      {"criterion", opts.criterion},
      {"phase", opts.phase},
      {"endpoint", ctx.endpoint},
      {"model", ctx.model},
      {"seed", std::to_string(opts.common.seed.value_or(0))}};
  return nlohmann::json{{"settings", settings},
                        {"params", params},
                        {"counts",
                         {{"requested", requested},
                          {"generated", generated},
                          {"parsed", parsed},
                          {"quarantined", quarantined}}},
                        {"timestamp", timestamp_utc()},
                        {"manifest_hash", manifest_hash(settings)}};
}

}  // namespace detail

inline int run_datagen(const DatagenOptions& opts) {
  return detail::guarded([&]() {
    if (opts.phase != "topics" && opts.phase != "questions" && opts.phase != "pairs") {
      throw ConfigError("unknown phase: " + opts.phase);
    }
    auto ctx = detail::make_datagen_context(opts);
    detail::ensure_out_dir(opts.common.out_dir);
    const auto& dir = opts.common.out_dir;

    if (opts.phase == "topics") {
      const auto template_text =
          detail::read_text_file(ctx.templates_dir + "/topic_generation.txt");
      std::vector<std::string> prompts;
      for (const auto& seed : ctx.seeds) {
        prompts.push_back(datagen::render_topic_prompt(seed.question_type, template_text));
      }
      if (opts.dry_run) {
        for (const auto& prompt : prompts) std::cout << prompt << "\n---\n";
        return kExitOk;
      }
      const auto params = datagen::topic_generation_params();
      std::vector<llm::CompletionRequest> requests;
      for (auto& prompt : prompts) {
        requests.push_back(detail::make_request(ctx, prompt, params));
      }
      const auto outcomes = llm::complete_many(requests, ctx.concurrency, ctx.retry);
      std::vector<nlohmann::json> rows;
      std::size_t generated = 0;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok()) {
          std::cerr << "error: topic request " << i << " failed: " << outcomes[i].error
                    << "\n";
          continue;
        }
        for (const auto& topic : datagen::parse_topic_list(outcomes[i].result->text)) {
          rows.push_back({{"question_type", ctx.seeds[i].question_type}, {"topic", topic}});
          ++generated;
        }
      }
      ndjson::write_lines(dir + "/topics.ndjson", rows);
      detail::write_json_file(
          dir + "/manifest.json",
          detail::datagen_manifest(opts, ctx, params, requests.size(), generated,
                                   generated, 0));
      std::cout << "topics=" << generated << "\n";
      return kExitOk;
    }

    if (opts.phase == "questions") {
      const auto template_text =
          detail::read_text_file(ctx.templates_dir + "/question_generation.txt");
      // Hints pair each seed question type with a generated topic when one
      // is available, falling back to the seed topic.
      std::map<std::string, std::vector<std::string>> topics_by_type;
      if (!opts.input_path.empty()) {
        auto [rows, errors] = ndjson::read_file<nlohmann::json>(opts.input_path);
        for (const auto& row : rows) {
          if (row.contains("question_type") && row.contains("topic")) {
            topics_by_type[row["question_type"].get<std::string>()].push_back(
                row["topic"].get<std::string>());
          }
        }
      }
      std::vector<std::pair<std::string, std::string>> hints;
      for (const auto& seed : ctx.seeds) {
        const auto it = topics_by_type.find(seed.question_type);
        if (it != topics_by_type.end() && !it->second.empty()) {
          hints.emplace_back(seed.question_type, it->second.front());
          it->second.erase(it->second.begin());
        } else {
          hints.emplace_back(seed.question_type, seed.topic);
        }
      }
      std::vector<std::string> demonstrations;
      for (const auto& seed : ctx.seeds) demonstrations.push_back(seed.question);

      const auto params = datagen::question_generation_params();
      std::vector<nlohmann::json> rows;
      std::size_t requested = 0;
      for (int round = 0; round < opts.rounds; ++round) {
        const auto prompt =
            datagen::render_question_prompt(hints, demonstrations, template_text);
        if (opts.dry_run) {
          std::cout << prompt << "\n---\n";
          continue;
        }
        ++requested;
        const auto result =
            llm::complete(detail::make_request(ctx, prompt, params), ctx.retry);
        for (const auto& question : datagen::parse_question_list(result.text)) {
          rows.push_back({{"question", question}});
          demonstrations.push_back(question);
        }
      }
      if (opts.dry_run) return kExitOk;
      ndjson::write_lines(dir + "/questions.ndjson", rows);
      detail::write_json_file(
          dir + "/manifest.json",
          detail::datagen_manifest(opts, ctx, params, requested, rows.size(),
                                   rows.size(), 0));
      std::cout << "questions=" << rows.size() << "\n";
      return kExitOk;
    }

    // pairs
    const auto principle_set = datagen::builtin_principles(opts.criterion);
    if (opts.input_path.empty()) {
      throw ConfigError("pairs phase needs --input with one input per line");
    }
    const auto inputs = detail::read_input_lines(opts.input_path);
    if (inputs.empty()) throw ConfigError("no inputs found in " + opts.input_path);

    if (opts.dry_run) {
      for (const auto& x : inputs) {
        std::cout << datagen::render_pair_prompt(principle_set, x) << "\n---\n";
      }
      return kExitOk;
    }

    const auto params = datagen::pair_generation_params();
    std::vector<llm::CompletionRequest> requests;
    for (const auto& x : inputs) {
      requests.push_back(detail::make_request(
          ctx, datagen::render_pair_prompt(principle_set, x), params));
    }
    const auto outcomes = llm::complete_many(requests, ctx.concurrency, ctx.retry);

    std::vector<datagen::Triple> triples;
    std::vector<nlohmann::json> quarantine;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!outcomes[i].ok()) {
        quarantine.push_back(
            {{"input", inputs[i]}, {"error", outcomes[i].error}, {"raw", nullptr}});
        continue;
      }
      try {
        triples.push_back(datagen::parse_pair_completion(
            outcomes[i].result->text, inputs[i], principle_set.role_word,
            opts.criterion));
      } catch (const datagen::ParseError& e) {
        quarantine.push_back(
            {{"input", inputs[i]}, {"error", e.what()}, {"raw", e.raw()}});
      }
    }

    const auto min_len =
        static_cast<std::size_t>(ctx.config.get_int("datagen.min_len", 10));
    const double similarity =
        ctx.config.get_double("datagen.similarity_threshold", 0.85);
    const auto kept = datagen::dedupe_and_filter(triples, min_len, similarity);

    const auto manifest =
        detail::datagen_manifest(opts, ctx, params, requests.size(), outcomes.size(),
                                 triples.size(), quarantine.size());
    std::vector<nlohmann::json> dataset_rows;
    for (const auto& triple : kept) {
      nlohmann::json row = triple;
      row["meta"] = {{"model", ctx.model},
                     {"params", params},
                     {"timestamp", manifest["timestamp"]},
                     {"manifest_hash", manifest["manifest_hash"]}};
      dataset_rows.push_back(std::move(row));
    }
    ndjson::write_lines(dir + "/dataset.ndjson", dataset_rows);
    ndjson::write_lines(dir + "/quarantine.ndjson", quarantine);
    detail::write_json_file(dir + "/manifest.json", manifest);
    std::cout << "parsed=" << triples.size() << " kept=" << kept.size()
              << " quarantined=" << quarantine.size() << "\n";
    return kExitOk;
  });
}

}  // namespace alignkit::cli
