#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/matrix.hpp"
#include "alignkit/rng.hpp"

namespace alignkit {

// One depth-1 regression tree. value_le fires when feature <= threshold.
// Leaf values are stored already scaled by the learning rate.
struct Stump {
  int feature = 0;
  double threshold = 0.0;
  double value_le = 0.0;
  double value_gt = 0.0;
};

inline void to_json(nlohmann::json& j, const Stump& s) {
  j = nlohmann::json::array({s.feature, s.threshold, s.value_le, s.value_gt});
}

inline void from_json(const nlohmann::json& j, Stump& s) {
  s.feature = j.at(0).get<int>();
  s.threshold = j.at(1).get<double>();
  s.value_le = j.at(2).get<double>();
  s.value_gt = j.at(3).get<double>();
}

struct StumpTrainConfig {
  int n_rounds = 200;
  double learning_rate = 0.1;
  // Fraction of rows used per round for split finding and leaf values.
  // 1.0 keeps training fully deterministic regardless of seed.
  double subsample = 1.0;
  std::uint64_t seed = 0;
};

inline double stump_ensemble_margin(std::span<const Stump> ensemble,
                                    std::span<const double> features) {
  double total = 0.0;
  for (const Stump& s : ensemble) {
    total += features[static_cast<std::size_t>(s.feature)] <= s.threshold
                 ? s.value_le
                 : s.value_gt;
  }
  return total;
}

// Probability of class 1: logistic link over the summed stump outputs.
// An empty ensemble therefore scores 0.5.
inline double stump_ensemble_score(std::span<const Stump> ensemble,
                                   std::span<const double> features) {
  return 1.0 / (1.0 + std::exp(-stump_ensemble_margin(ensemble, features)));
}

// Gradient boosting with logistic loss. Each round fits a stump to the
// Newton direction: split gain G_L^2/H_L + G_R^2/H_R with G = sum(y - p),
// H = sum(p(1-p)); leaf value G/H. Candidate thresholds are midpoints of
// consecutive distinct sorted feature values. Ties between splits resolve
// to the earliest (feature, threshold) in scan order, so training is
// deterministic.
inline std::vector<Stump> fit_stump_ensemble(const Matrix& features,
                                             const std::vector<int>& labels,
                                             const StumpTrainConfig& config) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0 || labels.size() != n) {
    throw ContractError("fit_stump_ensemble: empty data or label size mismatch");
  }
  bool saw0 = false;
  bool saw1 = false;
  for (int y : labels) {
    if (y == 0) saw0 = true;
    else if (y == 1) saw1 = true;
    else throw ContractError("fit_stump_ensemble: labels must be 0 or 1");
  }
  if (!saw0 || !saw1) {
    throw ContractError("fit_stump_ensemble: single-class data");
  }
  if (config.n_rounds < 1 || config.subsample <= 0.0 || config.subsample > 1.0) {
    throw ContractError("fit_stump_ensemble: bad training configuration");
  }

  // Per-feature row order, sorted once up front.
  std::vector<std::vector<std::uint32_t>> order(d);
  for (std::size_t f = 0; f < d; ++f) {
    order[f].resize(n);
    std::iota(order[f].begin(), order[f].end(), 0u);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       return features(a, f) < features(b, f);
                     });
  }

  constexpr double kMinHessian = 1e-12;
  Rng rng(config.seed);
  std::vector<double> score(n, 0.0);
  std::vector<double> grad(n), hess(n);
  std::vector<char> in_round(n, 1);
  std::vector<Stump> ensemble;
  ensemble.reserve(static_cast<std::size_t>(config.n_rounds));

  for (int round = 0; round < config.n_rounds; ++round) {
    if (config.subsample < 1.0) {
      const auto take = static_cast<std::size_t>(
          std::max<double>(1.0, std::floor(config.subsample * static_cast<double>(n))));
      std::fill(in_round.begin(), in_round.end(), 0);
      for (std::size_t idx : rng.sample_indices(n, take)) in_round[idx] = 1;
    }

    double total_g = 0.0;
    double total_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-score[i]));
      grad[i] = in_round[i] ? static_cast<double>(labels[i]) - p : 0.0;
      hess[i] = in_round[i] ? std::max(p * (1.0 - p), kMinHessian) : 0.0;
      total_g += grad[i];
      total_h += hess[i];
    }
    const double base_gain = total_g * total_g / std::max(total_h, kMinHessian);

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
      double gl = 0.0;
      double hl = 0.0;
      const auto& ord = order[f];
      for (std::size_t k = 0; k + 1 < n; ++k) {
        gl += grad[ord[k]];
        hl += hess[ord[k]];
        const double lo = features(ord[k], f);
        const double hi = features(ord[k + 1], f);
        if (lo == hi) continue;
        const double gr = total_g - gl;
        const double hr = total_h - hl;
        const double gain = gl * gl / std::max(hl, kMinHessian) +
                            gr * gr / std::max(hr, kMinHessian) - base_gain;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }

    Stump stump;
    if (best_feature < 0) {
      // No split improves: fall back to a constant Newton step.
      const double w = config.learning_rate * total_g / std::max(total_h, kMinHessian);
      stump = Stump{0, std::numeric_limits<double>::max(), w, w};
    } else {
      double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (features(i, static_cast<std::size_t>(best_feature)) <= best_threshold) {
          gl += grad[i];
          hl += hess[i];
        } else {
          gr += grad[i];
          hr += hess[i];
        }
      }
      stump = Stump{best_feature, best_threshold,
                    config.learning_rate * gl / std::max(hl, kMinHessian),
                    config.learning_rate * gr / std::max(hr, kMinHessian)};
    }
    for (std::size_t i = 0; i < n; ++i) {
      score[i] += features(i, static_cast<std::size_t>(stump.feature)) <= stump.threshold
                      ? stump.value_le
                      : stump.value_gt;
    }
    ensemble.push_back(stump);
  }
  return ensemble;
}

}  // namespace alignkit
