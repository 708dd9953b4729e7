#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignkit/boosting.hpp"
#include "alignkit/errors.hpp"
#include "alignkit/matrix.hpp"
#include "alignkit/rng.hpp"

namespace alignkit::sim {

// ---------------------------------------------------------------------------
// World model: a response's latent score is content(x) plus constant style
// offsets. Content is tanh(W x); each alignment style k shifts the latent
// vector by offset_k, and an aligner's whole job is to learn that shift.
// ---------------------------------------------------------------------------

enum class ScenarioKind { independent, synergistic, conflicting };

inline std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::independent: return "independent";
    case ScenarioKind::synergistic: return "synergistic";
    case ScenarioKind::conflicting: return "conflicting";
  }
  throw ContractError("unknown scenario kind");
}

inline ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "independent") return ScenarioKind::independent;
  if (name == "synergistic") return ScenarioKind::synergistic;
  if (name == "conflicting") return ScenarioKind::conflicting;
  throw ContractError("unknown scenario kind: " + name);
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::independent;
  std::vector<double> offset_a;
  std::vector<double> offset_b;
  int sparsity = 0;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

struct LatentModel {
  Matrix content_matrix;                          // d_latent x d_in
  std::vector<std::vector<double>> style_offsets; // K vectors, each d_latent
  std::vector<double> style_weights;              // K, defaults to 1.0
  std::size_t d_in = 0;
  std::size_t d_latent = 0;

  std::size_t num_styles() const { return style_offsets.size(); }
};

struct SimDataset {
  Matrix inputs;                      // n x d_in
  Matrix misaligned_scores;           // n x d_latent
  std::vector<Matrix> aligned_scores; // per style, n x d_latent
  std::size_t n = 0;
};

struct SimAligner {
  int criterion_index = 0;
  std::vector<double> offset_estimate;
  double l1_penalty = 0.0;
};

struct SimInspector {
  int criterion_index = 0;
  std::vector<Stump> ensemble;
  double learning_rate = 0.0;
  int n_rounds = 0;
  std::size_t d_in = 0;
  std::size_t d_latent = 0;
};

enum class TerminalStatus { aligned, iteration_limit };

struct TrajectoryStep {
  int applied_criterion = 0;
  std::vector<double> scores;  // all inspectors, after the application
};

struct Trajectory {
  std::vector<double> initial_scores;
  std::vector<TrajectoryStep> steps;  // one entry per aligner application
  TerminalStatus terminal_status = TerminalStatus::iteration_limit;
  double threshold = 0.0;
  int max_steps = 0;

  const std::vector<double>& final_scores() const {
    return steps.empty() ? initial_scores : steps.back().scores;
  }
  int applications() const { return static_cast<int>(steps.size()); }
};

// ---------------------------------------------------------------------------
// World construction
// ---------------------------------------------------------------------------

inline Matrix generate_inputs(std::size_t n, std::size_t d_in, std::uint64_t seed) {
  if (n < 1 || d_in < 1) throw ContractError("generate_inputs: n and d_in must be >= 1");
  Rng rng(seed);
  Matrix inputs(n, d_in);
  for (double& v : inputs.data()) v = rng.normal();
  return inputs;
}

inline ScenarioSpec make_scenario(ScenarioKind kind, std::size_t d_latent,
                                  std::size_t sparsity, double magnitude,
                                  std::uint64_t seed) {
  if (d_latent < 1 || sparsity < 1) {
    throw ContractError("make_scenario: d_latent and sparsity must be >= 1");
  }
  if (kind == ScenarioKind::independent && 2 * sparsity > d_latent) {
    throw ContractError("make_scenario: independent offsets need 2*sparsity <= d_latent");
  }
  if (sparsity > d_latent) {
    throw ContractError("make_scenario: sparsity exceeds d_latent");
  }
  Rng rng(seed);
  ScenarioSpec spec;
  spec.kind = kind;
  spec.sparsity = static_cast<int>(sparsity);
  spec.magnitude = magnitude;
  spec.seed = seed;
  spec.offset_a.assign(d_latent, 0.0);
  spec.offset_b.assign(d_latent, 0.0);
  if (kind == ScenarioKind::independent) {
    const auto coords = rng.sample_indices(d_latent, 2 * sparsity);
    for (std::size_t i = 0; i < sparsity; ++i) {
      spec.offset_a[coords[i]] = magnitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
    for (std::size_t i = sparsity; i < 2 * sparsity; ++i) {
      spec.offset_b[coords[i]] = magnitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
  } else {
    // Shared support: identical offsets reinforce each other, negated
    // offsets undo each other.
    const auto coords = rng.sample_indices(d_latent, sparsity);
    const double sign_b = kind == ScenarioKind::synergistic ? 1.0 : -1.0;
    for (std::size_t i = 0; i < sparsity; ++i) {
      const double v = magnitude * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      spec.offset_a[coords[i]] = v;
      spec.offset_b[coords[i]] = sign_b * v;
    }
  }
  return spec;
}

// Content matrix entries ~ N(0, 1/d_in) so pre-tanh activations of a
// standard-normal input have unit variance and the content scores spread
// across (-1, 1) instead of saturating.
inline LatentModel make_latent_model(std::size_t d_in, std::size_t d_latent,
                                     const ScenarioSpec& scenario,
                                     std::uint64_t seed) {
  if (scenario.offset_a.size() != d_latent || scenario.offset_b.size() != d_latent) {
    throw ContractError("make_latent_model: scenario offsets do not match d_latent");
  }
  Rng rng(seed);
  LatentModel model;
  model.d_in = d_in;
  model.d_latent = d_latent;
  model.content_matrix = Matrix(d_latent, d_in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& v : model.content_matrix.data()) v = scale * rng.normal();
  model.style_offsets = {scenario.offset_a, scenario.offset_b};
  model.style_weights.assign(model.style_offsets.size(), 1.0);
  return model;
}

inline std::vector<double> content_score(const LatentModel& model,
                                         std::span<const double> x) {
  if (x.size() != model.d_in) {
    throw ContractError("content_score: input length does not match d_in");
  }
  std::vector<double> latent = multiply(model.content_matrix, x);
  for (double& v : latent) v = std::tanh(v);
  return latent;
}

inline std::vector<double> apply_true_style(const LatentModel& model,
                                            std::span<const double> latent,
                                            std::size_t k) {
  if (k >= model.num_styles()) throw ContractError("apply_true_style: style index out of range");
  if (latent.size() != model.d_latent) {
    throw ContractError("apply_true_style: latent length does not match d_latent");
  }
  std::vector<double> shifted(latent.begin(), latent.end());
  const auto& offset = model.style_offsets[k];
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += offset[i];
  return shifted;
}

// Exact construction: aligned_scores[k] - misaligned_scores == offset_k,
// row for row, with no noise. Observation noise is a separate step.
inline SimDataset build_dataset(const LatentModel& model, Matrix inputs) {
  if (inputs.cols() != model.d_in) {
    throw ContractError("build_dataset: inputs do not match d_in");
  }
  SimDataset data;
  data.n = inputs.rows();
  data.misaligned_scores = Matrix(data.n, model.d_latent);
  for (std::size_t i = 0; i < data.n; ++i) {
    const auto latent = content_score(model, inputs.row(i));
    std::copy(latent.begin(), latent.end(), data.misaligned_scores.row(i).begin());
  }
  data.aligned_scores.reserve(model.num_styles());
  for (std::size_t k = 0; k < model.num_styles(); ++k) {
    Matrix aligned(data.n, model.d_latent);
    for (std::size_t i = 0; i < data.n; ++i) {
      const auto row = data.misaligned_scores.row(i);
      auto out = aligned.row(i);
      for (std::size_t j = 0; j < model.d_latent; ++j) {
        const double offset = model.style_offsets[k][j];
        double a = row[j] + offset;
        // Rounded addition does not guarantee (a - row[j]) == offset; nudge
        // a until the subtraction recovers the offset bit-exactly.
        for (int fix = 0; fix < 4 && a - row[j] != offset; ++fix) {
          a += offset - (a - row[j]);
        }
        out[j] = a;
      }
    }
    data.aligned_scores.push_back(std::move(aligned));
  }
  data.inputs = std::move(inputs);
  return data;
}

// Adds i.i.d. Gaussian observation noise to every aligned target. The
// returned dataset intentionally breaks the exact-offset invariant of
// build_dataset; train on it, don't assert on it.
inline SimDataset perturb_targets(SimDataset data, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ContractError("perturb_targets: sigma must be >= 0");
  Rng rng(seed);
  for (Matrix& aligned : data.aligned_scores) {
    for (double& v : aligned.data()) v += sigma * rng.normal();
  }
  return data;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// L1-penalized least squares on the per-coordinate residual
// (aligned - misaligned). Each coordinate is an intercept-only problem, so
// cyclic coordinate descent reduces to soft-thresholding the residual mean;
// the sweep loop stays in place to honor the tol/max_sweeps contract.
inline SimAligner train_aligner(const SimDataset& data, std::size_t k,
                                double l1_penalty, int max_sweeps = 1000,
                                double tol = 1e-8) {
  if (k >= data.aligned_scores.size()) {
    throw ContractError("train_aligner: criterion index out of range");
  }
  if (data.n < 1) throw ContractError("train_aligner: empty dataset");
  if (l1_penalty < 0.0 || max_sweeps < 1 || tol < 0.0) {
    throw ContractError("train_aligner: bad hyperparameters");
  }
  const Matrix& aligned = data.aligned_scores[k];
  const std::size_t d = data.misaligned_scores.cols();

  std::vector<double> mean_residual(d, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) {
    const auto a = aligned.row(i);
    const auto m = data.misaligned_scores.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double r = a[j] - m[j];
      if (!std::isfinite(r)) throw ContractError("train_aligner: non-finite residual");
      mean_residual[j] += r;
    }
  }
  for (double& v : mean_residual) v /= static_cast<double>(data.n);

  SimAligner aligner;
  aligner.criterion_index = static_cast<int>(k);
  aligner.l1_penalty = l1_penalty;
  aligner.offset_estimate.assign(d, 0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double m = mean_residual[j];
      double next = 0.0;
      if (m > l1_penalty) next = m - l1_penalty;
      else if (m < -l1_penalty) next = m + l1_penalty;
      max_change = std::max(max_change, std::abs(next - aligner.offset_estimate[j]));
      aligner.offset_estimate[j] = next;
    }
    if (max_change < tol) break;
  }
  return aligner;
}

// Feature vector for the inspector: input features first, latent scores
// after, matching the (x, u) classifier signature.
inline std::vector<double> inspector_features(std::span<const double> x,
                                              std::span<const double> u) {
  std::vector<double> features;
  features.reserve(x.size() + u.size());
  features.insert(features.end(), x.begin(), x.end());
  features.insert(features.end(), u.begin(), u.end());
  return features;
}

namespace detail {
// Stacks (x, misaligned) rows labeled 0 over (x, aligned) rows labeled 1,
// restricted to the given input indices.
inline std::pair<Matrix, std::vector<int>> stack_classifier_rows(
    const SimDataset& data, std::size_t k, std::span<const std::size_t> rows) {
  const std::size_t d_in = data.inputs.cols();
  const std::size_t d_lat = data.misaligned_scores.cols();
  Matrix features(2 * rows.size(), d_in + d_lat);
  std::vector<int> labels(2 * rows.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    auto neg = features.row(r);
    auto pos = features.row(rows.size() + r);
    const auto x = data.inputs.row(i);
    std::copy(x.begin(), x.end(), neg.begin());
    std::copy(x.begin(), x.end(), pos.begin());
    const auto mis = data.misaligned_scores.row(i);
    std::copy(mis.begin(), mis.end(), neg.begin() + static_cast<long>(d_in));
    const auto al = data.aligned_scores[k].row(i);
    std::copy(al.begin(), al.end(), pos.begin() + static_cast<long>(d_in));
    labels[rows.size() + r] = 1;
  }
  return {std::move(features), std::move(labels)};
}
}  // namespace detail

inline SimInspector train_inspector(const SimDataset& data, std::size_t k,
                                    int n_rounds = 200, double learning_rate = 0.1,
                                    std::uint64_t seed = 0, double subsample = 1.0) {
  if (k >= data.aligned_scores.size()) {
    throw ContractError("train_inspector: criterion index out of range");
  }
  if (data.n < 1) throw ContractError("train_inspector: empty dataset");
  std::vector<std::size_t> rows(data.n);
  for (std::size_t i = 0; i < data.n; ++i) rows[i] = i;
  auto [features, labels] = detail::stack_classifier_rows(data, k, rows);
  SimInspector inspector;
  inspector.criterion_index = static_cast<int>(k);
  inspector.learning_rate = learning_rate;
  inspector.n_rounds = n_rounds;
  inspector.d_in = data.inputs.cols();
  inspector.d_latent = data.misaligned_scores.cols();
  inspector.ensemble = fit_stump_ensemble(
      features, labels, StumpTrainConfig{n_rounds, learning_rate, subsample, seed});
  return inspector;
}

inline double inspector_score(const SimInspector& inspector,
                              std::span<const double> x,
                              std::span<const double> u) {
  if (x.size() != inspector.d_in || u.size() != inspector.d_latent) {
    throw ContractError("inspector_score: feature dimensions do not match training");
  }
  const auto features = inspector_features(x, u);
  return stump_ensemble_score(inspector.ensemble, features);
}

// Held-out accuracy with the train/test split taken over *inputs*, so both
// class rows of an input land on the same side. Splitting stacked rows
// instead leaks duplicate features across the split and anti-learns.
inline double holdout_accuracy(const SimDataset& data, std::size_t k,
                               double train_fraction, std::uint64_t split_seed,
                               int n_rounds = 200, double learning_rate = 0.1) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ContractError("holdout_accuracy: train_fraction must be in (0,1)");
  }
  std::vector<std::size_t> perm(data.n);
  for (std::size_t i = 0; i < data.n; ++i) perm[i] = i;
  Rng rng(split_seed);
  rng.shuffle(perm);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(data.n)));
  if (n_train == 0 || n_train == data.n) {
    throw ContractError("holdout_accuracy: split leaves an empty side");
  }
  std::span<const std::size_t> train_rows(perm.data(), n_train);
  std::span<const std::size_t> test_rows(perm.data() + n_train, data.n - n_train);

  auto [features, labels] = detail::stack_classifier_rows(data, k, train_rows);
  const auto ensemble = fit_stump_ensemble(
      features, labels, StumpTrainConfig{n_rounds, learning_rate, 1.0, 0});

  auto [test_features, test_labels] = detail::stack_classifier_rows(data, k, test_rows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    const int predicted =
        stump_ensemble_score(ensemble, test_features.row(i)) > 0.5 ? 1 : 0;
    if (predicted == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

// ---------------------------------------------------------------------------
// Sequential application
// ---------------------------------------------------------------------------

// Score all inspectors; stop as aligned once every score clears the
// threshold; otherwise apply the aligner whose inspector score is lowest
// (lowest criterion index on ties) and re-score. If the map right after the
// final permitted application clears the threshold, the run still counts as
// aligned; otherwise it ends as iteration_limit.
inline Trajectory run_trajectory(std::span<const double> x,
                                 std::span<const double> start,
                                 const std::vector<SimAligner>& aligners,
                                 const std::vector<SimInspector>& inspectors,
                                 double threshold, int max_steps) {
  if (aligners.empty() || aligners.size() != inspectors.size()) {
    throw ContractError("run_trajectory: aligners/inspectors must be nonempty and equal length");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("run_trajectory: threshold must be in (0,1)");
  }
  if (max_steps < 1) throw ContractError("run_trajectory: max_steps must be >= 1");

  const std::size_t num_styles = aligners.size();
  std::vector<double> latent(start.begin(), start.end());
  auto score_all = [&]() {
    std::vector<double> scores(num_styles);
    for (std::size_t k = 0; k < num_styles; ++k) {
      scores[k] = inspector_score(inspectors[k], x, latent);
    }
    return scores;
  };

  Trajectory trajectory;
  trajectory.threshold = threshold;
  trajectory.max_steps = max_steps;
  trajectory.initial_scores = score_all();

  std::vector<double> current = trajectory.initial_scores;
  while (true) {
    const bool all_clear = std::all_of(current.begin(), current.end(),
                                       [&](double s) { return s >= threshold; });
    if (all_clear) {
      trajectory.terminal_status = TerminalStatus::aligned;
      break;
    }
    if (trajectory.applications() == max_steps) {
      trajectory.terminal_status = TerminalStatus::iteration_limit;
      break;
    }
    const std::size_t k = static_cast<std::size_t>(
        std::min_element(current.begin(), current.end()) - current.begin());
    const auto& offset = aligners[k].offset_estimate;
    for (std::size_t j = 0; j < latent.size(); ++j) latent[j] += offset[j];
    current = score_all();
    trajectory.steps.push_back(TrajectoryStep{static_cast<int>(k), current});
  }
  return trajectory;
}

// ---------------------------------------------------------------------------
// Serialization (explicit seeds ride along for exact replay)
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)},
                     {"offset_a", s.offset_a},
                     {"offset_b", s.offset_b},
                     {"sparsity", s.sparsity},
                     {"magnitude", s.magnitude},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  s.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  j.at("offset_a").get_to(s.offset_a);
  j.at("offset_b").get_to(s.offset_b);
  j.at("sparsity").get_to(s.sparsity);
  j.at("magnitude").get_to(s.magnitude);
  j.at("seed").get_to(s.seed);
}

inline void to_json(nlohmann::json& j, const LatentModel& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.content_matrix.rows(); ++r) {
    const auto row = m.content_matrix.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j = nlohmann::json{{"d_in", m.d_in},
                     {"d_latent", m.d_latent},
                     {"content_matrix", std::move(rows)},
                     {"style_offsets", m.style_offsets},
                     {"style_weights", m.style_weights}};
}

inline void from_json(const nlohmann::json& j, LatentModel& m) {
  j.at("d_in").get_to(m.d_in);
  j.at("d_latent").get_to(m.d_latent);
  const auto& rows = j.at("content_matrix");
  m.content_matrix = Matrix(rows.size(), m.d_in);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].get<std::vector<double>>();
    if (row.size() != m.d_in) throw ContractError("LatentModel: ragged content matrix");
    std::copy(row.begin(), row.end(), m.content_matrix.row(r).begin());
  }
  j.at("style_offsets").get_to(m.style_offsets);
  j.at("style_weights").get_to(m.style_weights);
  if (m.content_matrix.rows() != m.d_latent) {
    throw ContractError("LatentModel: content matrix rows do not match d_latent");
  }
  for (const auto& offset : m.style_offsets) {
    if (offset.size() != m.d_latent) {
      throw ContractError("LatentModel: style offset length does not match d_latent");
    }
  }
}

inline void to_json(nlohmann::json& j, const SimAligner& a) {
  j = nlohmann::json{{"criterion_index", a.criterion_index},
                     {"offset_estimate", a.offset_estimate},
                     {"l1_penalty", a.l1_penalty}};
}

inline void from_json(const nlohmann::json& j, SimAligner& a) {
  j.at("criterion_index").get_to(a.criterion_index);
  j.at("offset_estimate").get_to(a.offset_estimate);
  j.at("l1_penalty").get_to(a.l1_penalty);
}

inline void to_json(nlohmann::json& j, const SimInspector& i) {
  j = nlohmann::json{{"criterion_index", i.criterion_index},
                     {"ensemble", i.ensemble},
                     {"learning_rate", i.learning_rate},
                     {"n_rounds", i.n_rounds},
                     {"d_in", i.d_in},
                     {"d_latent", i.d_latent}};
}

inline void from_json(const nlohmann::json& j, SimInspector& i) {
  j.at("criterion_index").get_to(i.criterion_index);
  j.at("ensemble").get_to(i.ensemble);
  j.at("learning_rate").get_to(i.learning_rate);
  j.at("n_rounds").get_to(i.n_rounds);
  j.at("d_in").get_to(i.d_in);
  j.at("d_latent").get_to(i.d_latent);
}

}  // namespace alignkit::sim
