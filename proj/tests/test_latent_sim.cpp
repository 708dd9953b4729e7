#include "alignkit/latent_sim.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace alignkit;
using namespace alignkit::sim;

namespace {

// Independent naive oracle: index-by-index multiply then tanh, written
// without the Matrix helpers.
std::vector<double> naive_content_score(const LatentModel& model,
                                        const std::vector<double>& x) {
  std::vector<double> out(model.d_latent, 0.0);
  for (std::size_t r = 0; r < model.d_latent; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < model.d_in; ++c) {
      acc += model.content_matrix(r, c) * x[c];
    }
    out[r] = std::tanh(acc);
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

SimDataset default_dataset(ScenarioKind kind, std::uint64_t seed, std::size_t n = 500,
                           double noise = 0.0) {
  const auto scenario = make_scenario(kind, 50, 5, 2.0, seed);
  const auto model = make_latent_model(100, 50, scenario, seed + 1);
  auto data = build_dataset(model, generate_inputs(n, 100, seed + 2));
  if (noise > 0.0) data = perturb_targets(std::move(data), noise, seed + 3);
  return data;
}

}  // namespace

TEST_CASE("generate_inputs is deterministic per seed") {
  const auto a = generate_inputs(500, 100, 7);
  const auto b = generate_inputs(500, 100, 7);
  REQUIRE(a.rows() == 500);
  REQUIRE(a.cols() == 100);
  REQUIRE(a.data() == b.data());

  const auto tiny = generate_inputs(1, 1, 0);
  const auto tiny2 = generate_inputs(1, 1, 0);
  REQUIRE(tiny(0, 0) == tiny2(0, 0));

  const auto c = generate_inputs(500, 100, 8);
  REQUIRE(a.data() != c.data());
}

TEST_CASE("generate_inputs matches standard-normal moments") {
  const auto m = generate_inputs(10000, 100, 3);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      sum += m(r, c);
      sumsq += m(r, c) * m(r, c);
    }
    const double mean = sum / static_cast<double>(m.rows());
    const double var = sumsq / static_cast<double>(m.rows()) - mean * mean;
    REQUIRE(std::abs(mean) < 0.05);
    REQUIRE(std::abs(var - 1.0) < 0.1);
  }
}

TEST_CASE("content_score basics") {
  const auto scenario = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 1);
  const auto model = make_latent_model(100, 50, scenario, 2);

  SECTION("zero input maps to zero scores") {
    const std::vector<double> zero(100, 0.0);
    for (double v : content_score(model, zero)) REQUIRE(v == 0.0);
  }

  SECTION("saturation at large activations") {
    LatentModel tiny;
    tiny.d_in = 2;
    tiny.d_latent = 2;
    tiny.content_matrix = Matrix(2, 2);
    tiny.content_matrix(0, 0) = 1.0;
    tiny.content_matrix(1, 1) = 1.0;
    tiny.style_offsets = {{0.0, 0.0}};
    tiny.style_weights = {1.0};
    const auto out = content_score(tiny, std::vector<double>{50.0, -50.0});
    REQUIRE(out[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(out[1] == Catch::Approx(-1.0).margin(1e-9));
  }

  SECTION("bounded strictly inside (-1,1) and matches the naive oracle") {
    const auto inputs = generate_inputs(20, 100, 11);
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
      const std::vector<double> x(inputs.row(i).begin(), inputs.row(i).end());
      const auto got = content_score(model, x);
      const auto want = naive_content_score(model, x);
      for (std::size_t j = 0; j < got.size(); ++j) {
        REQUIRE(std::abs(got[j] - want[j]) < 1e-12);
        REQUIRE(got[j] > -1.0);
        REQUIRE(got[j] < 1.0);
      }
    }
  }

  SECTION("dimension mismatch throws") {
    REQUIRE_THROWS_AS(content_score(model, std::vector<double>(99, 0.0)), ContractError);
  }
}

TEST_CASE("apply_true_style adds the offset exactly and commutes") {
  auto scenario = make_scenario(ScenarioKind::independent, 10, 2, 2.0, 5);
  auto model = make_latent_model(4, 10, scenario, 6);

  const std::vector<double> zero(10, 0.0);
  SECTION("zero offset is the identity") {
    model.style_offsets[0].assign(10, 0.0);
    REQUIRE(apply_true_style(model, zero, 0) == zero);
  }

  SECTION("additive definition") {
    model.style_offsets[0].assign(10, 0.0);
    model.style_offsets[0][0] = 2.0;
    const auto out = apply_true_style(model, zero, 0);
    REQUIRE(out[0] == 2.0);
    for (std::size_t i = 1; i < out.size(); ++i) REQUIRE(out[i] == 0.0);
  }

  SECTION("order of application is irrelevant") {
    Rng rng(42);
    std::vector<double> latent(10);
    for (double& v : latent) v = rng.normal();
    const auto ab = apply_true_style(model, apply_true_style(model, latent, 0), 1);
    const auto ba = apply_true_style(model, apply_true_style(model, latent, 1), 0);
    REQUIRE(ab == ba);
  }

  SECTION("style index out of range throws") {
    REQUIRE_THROWS_AS(apply_true_style(model, zero, 2), ContractError);
  }
}

TEST_CASE("make_scenario satisfies the regime invariants") {
  SECTION("independent: disjoint supports, zero inner product") {
    const auto s = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 1);
    REQUIRE(dot(s.offset_a, s.offset_b) == 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
      REQUIRE_FALSE((s.offset_a[i] != 0.0 && s.offset_b[i] != 0.0));
    }
    std::size_t nnz_a = 0;
    for (double v : s.offset_a) nnz_a += v != 0.0;
    REQUIRE(nnz_a == 5);
  }

  SECTION("synergistic: positive inner product, shared support and signs") {
    const auto s = make_scenario(ScenarioKind::synergistic, 50, 5, 2.0, 1);
    REQUIRE(dot(s.offset_a, s.offset_b) > 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
      if (s.offset_a[i] != 0.0) REQUIRE(s.offset_a[i] * s.offset_b[i] > 0.0);
    }
  }

  SECTION("conflicting: negative inner product, opposed signs") {
    const auto s = make_scenario(ScenarioKind::conflicting, 50, 5, 2.0, 1);
    REQUIRE(dot(s.offset_a, s.offset_b) < 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
      if (s.offset_a[i] != 0.0) REQUIRE(s.offset_a[i] * s.offset_b[i] < 0.0);
    }
  }

  SECTION("deterministic per seed") {
    const auto a = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 9);
    const auto b = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 9);
    REQUIRE(a.offset_a == b.offset_a);
    REQUIRE(a.offset_b == b.offset_b);
  }

  SECTION("infeasible sparsity throws") {
    REQUIRE_THROWS_AS(make_scenario(ScenarioKind::independent, 8, 5, 2.0, 1),
                      ContractError);
  }
}

TEST_CASE("build_dataset keeps the offset identity exact") {
  const auto scenario = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 3);
  const auto model = make_latent_model(100, 50, scenario, 4);
  const auto data = build_dataset(model, generate_inputs(50, 100, 5));
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < data.n; ++i) {
      for (std::size_t j = 0; j < 50; ++j) {
        REQUIRE(data.aligned_scores[k](i, j) - data.misaligned_scores(i, j) ==
                model.style_offsets[k][j]);
      }
    }
  }
}

TEST_CASE("train_aligner recovers offsets") {
  SECTION("noiseless, zero penalty: exact recovery") {
    const auto scenario = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 21);
    const auto model = make_latent_model(100, 50, scenario, 22);
    const auto data = build_dataset(model, generate_inputs(500, 100, 23));
    for (std::size_t k = 0; k < 2; ++k) {
      const auto aligner = train_aligner(data, k, 0.0);
      for (std::size_t j = 0; j < 50; ++j) {
        REQUIRE(std::abs(aligner.offset_estimate[j] - model.style_offsets[k][j]) < 1e-10);
      }
    }
  }

  SECTION("penalty above the largest mean residual kills every coordinate") {
    const auto data = default_dataset(ScenarioKind::independent, 31, 200, 0.1);
    // Kill condition computed from the sampled residual means themselves.
    double max_mean = 0.0;
    for (std::size_t j = 0; j < 50; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < data.n; ++i) {
        mean += data.aligned_scores[0](i, j) - data.misaligned_scores(i, j);
      }
      max_mean = std::max(max_mean, std::abs(mean / static_cast<double>(data.n)));
    }
    const auto aligner = train_aligner(data, 0, max_mean * 1.0001);
    for (double v : aligner.offset_estimate) REQUIRE(v == 0.0);
  }

  SECTION("noisy recovery at the default penalty") {
    // Thresholds pinned by the pre-build Monte-Carlo oracle at l1 = 0.025:
    // on-support mean Linf ~= 0.030, off-support exactly zero.
    double worst_on = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto scenario = make_scenario(ScenarioKind::independent, 50, 5, 2.0, seed);
      const auto model = make_latent_model(100, 50, scenario, seed + 100);
      auto data = build_dataset(model, generate_inputs(500, 100, seed + 200));
      data = perturb_targets(std::move(data), 0.1, seed + 300);
      const auto aligner = train_aligner(data, 0, 0.025);
      for (std::size_t j = 0; j < 50; ++j) {
        const double truth = model.style_offsets[0][j];
        const double err = std::abs(aligner.offset_estimate[j] - truth);
        if (truth != 0.0) {
          worst_on = std::max(worst_on, err);
        } else {
          REQUIRE(err < 1e-8);
        }
      }
    }
    REQUIRE(worst_on < 0.05);
  }

  SECTION("out-of-range criterion throws") {
    const auto data = default_dataset(ScenarioKind::independent, 33, 10);
    REQUIRE_THROWS_AS(train_aligner(data, 2, 0.0), ContractError);
  }
}

TEST_CASE("train_inspector separates the classes") {
  SECTION("separable scenario: held-out accuracy above 0.95") {
    const auto data = default_dataset(ScenarioKind::independent, 41, 500, 0.1);
    const double accuracy = holdout_accuracy(data, 0, 0.8, 99);
    REQUIRE(accuracy > 0.95);
  }

  SECTION("identical classes: held-out accuracy pinned near 0.5") {
    auto scenario = make_scenario(ScenarioKind::independent, 50, 5, 2.0, 43);
    scenario.offset_a.assign(50, 0.0);
    scenario.offset_b.assign(50, 0.0);
    const auto model = make_latent_model(100, 50, scenario, 44);
    const auto data = build_dataset(model, generate_inputs(300, 100, 45));
    const double accuracy = holdout_accuracy(data, 0, 0.8, 99, 50);
    REQUIRE(accuracy == Catch::Approx(0.5).margin(0.05));
  }

  SECTION("class-1 training rows outscore class-0 rows on average") {
    const auto data = default_dataset(ScenarioKind::independent, 47, 200, 0.1);
    const auto inspector = train_inspector(data, 1, 50);
    double mean0 = 0.0;
    double mean1 = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
      const std::vector<double> x(data.inputs.row(i).begin(), data.inputs.row(i).end());
      mean0 += inspector_score(inspector,
                               x, data.misaligned_scores.row(i));
      mean1 += inspector_score(inspector, x, data.aligned_scores[1].row(i));
    }
    REQUIRE(mean1 > mean0);
  }

  SECTION("training is deterministic") {
    const auto data = default_dataset(ScenarioKind::synergistic, 49, 100, 0.1);
    const auto a = train_inspector(data, 0, 30);
    const auto b = train_inspector(data, 0, 30);
    REQUIRE(a.ensemble.size() == b.ensemble.size());
    for (std::size_t i = 0; i < a.ensemble.size(); ++i) {
      REQUIRE(a.ensemble[i].feature == b.ensemble[i].feature);
      REQUIRE(a.ensemble[i].threshold == b.ensemble[i].threshold);
      REQUIRE(a.ensemble[i].value_le == b.ensemble[i].value_le);
      REQUIRE(a.ensemble[i].value_gt == b.ensemble[i].value_gt);
    }
  }
}

TEST_CASE("inspector_score link function") {
  SimInspector inspector;
  inspector.d_in = 2;
  inspector.d_latent = 1;
  const std::vector<double> x{0.0, 0.0};
  const std::vector<double> u{0.0};

  SECTION("empty ensemble scores 0.5") {
    REQUIRE(inspector_score(inspector, x, u) == 0.5);
  }

  SECTION("saturating stump pushes the score to 1") {
    inspector.ensemble = {Stump{0, 0.5, 10.0, 10.0}};
    REQUIRE(std::abs(inspector_score(inspector, x, u) - 1.0) < 1e-4);
  }

  SECTION("dimension mismatch throws") {
    REQUIRE_THROWS_AS(inspector_score(inspector, std::vector<double>{1.0}, u),
                      ContractError);
  }
}

TEST_CASE("fit_stump_ensemble rejects single-class data") {
  Matrix features(4, 2);
  REQUIRE_THROWS_AS(
      fit_stump_ensemble(features, std::vector<int>{1, 1, 1, 1}, StumpTrainConfig{}),
      ContractError);
}

TEST_CASE("run_trajectory control flow") {
  // Hand-built inspectors: score is a logistic of the first latent
  // coordinate, so the trajectory math is enumerable by hand.
  auto make_world = [](double offset0, double offset1) {
    SimInspector insp0;
    insp0.d_in = 1;
    insp0.d_latent = 2;
    insp0.ensemble = {Stump{1, 0.5, -8.0, 8.0}};  // latent[0] > 0.5 -> ~1
    SimInspector insp1 = insp0;
    insp1.ensemble = {Stump{2, 0.5, -8.0, 8.0}};  // latent[1] > 0.5 -> ~1
    SimAligner al0{0, {offset0, 0.0}, 0.0};
    SimAligner al1{1, {0.0, offset1}, 0.0};
    return std::make_pair(std::vector<SimAligner>{al0, al1},
                          std::vector<SimInspector>{insp0, insp1});
  };
  const std::vector<double> x{0.0};

  SECTION("already aligned: zero applications") {
    auto [aligners, inspectors] = make_world(1.0, 1.0);
    const std::vector<double> start{1.0, 1.0};
    const auto t = run_trajectory(x, start, aligners, inspectors, 0.9, 5);
    REQUIRE(t.terminal_status == TerminalStatus::aligned);
    REQUIRE(t.applications() == 0);
  }

  SECTION("two independent offsets need two applications") {
    auto [aligners, inspectors] = make_world(1.0, 1.0);
    const std::vector<double> start{0.0, 0.0};
    const auto t = run_trajectory(x, start, aligners, inspectors, 0.9, 5);
    REQUIRE(t.terminal_status == TerminalStatus::aligned);
    REQUIRE(t.applications() == 2);
    // tie at the start resolves to the lowest criterion index
    REQUIRE(t.steps[0].applied_criterion == 0);
    REQUIRE(t.steps[1].applied_criterion == 1);
  }

  SECTION("useless aligners run into the iteration limit") {
    auto [aligners, inspectors] = make_world(0.0, 0.0);
    const std::vector<double> start{0.0, 0.0};
    const auto t = run_trajectory(x, start, aligners, inspectors, 0.9, 5);
    REQUIRE(t.terminal_status == TerminalStatus::iteration_limit);
    REQUIRE(t.applications() == 5);
    const auto& final_scores = t.final_scores();
    REQUIRE_FALSE(std::all_of(final_scores.begin(), final_scores.end(),
                              [](double s) { return s >= 0.9; }));
  }

  SECTION("alignment achieved exactly at the step cap still counts") {
    // One aligner that needs two applications to push latent[0] past 0.5.
    auto [aligners, inspectors] = make_world(0.3, 1.0);
    const std::vector<double> start{0.0, 1.0};
    const auto t = run_trajectory(x, start, aligners, inspectors, 0.9, 2);
    REQUIRE(t.applications() == 2);
    REQUIRE(t.terminal_status == TerminalStatus::aligned);
  }

  SECTION("precondition violations throw") {
    auto [aligners, inspectors] = make_world(1.0, 1.0);
    const std::vector<double> start{0.0, 0.0};
    REQUIRE_THROWS_AS(run_trajectory(x, start, {}, {}, 0.9, 5), ContractError);
    REQUIRE_THROWS_AS(run_trajectory(x, start, aligners, inspectors, 1.5, 5),
                      ContractError);
    REQUIRE_THROWS_AS(run_trajectory(x, start, aligners, inspectors, 0.9, 0),
                      ContractError);
  }
}

TEST_CASE("sim serialization round-trips") {
  const auto scenario = make_scenario(ScenarioKind::conflicting, 20, 3, 1.5, 77);
  const auto model = make_latent_model(10, 20, scenario, 78);
  const auto data = build_dataset(model, generate_inputs(40, 10, 79));
  const auto aligner = train_aligner(data, 0, 0.01);
  const auto inspector = train_inspector(data, 0, 20);

  const nlohmann::json j_scenario = scenario;
  const auto scenario2 = j_scenario.get<ScenarioSpec>();
  REQUIRE(scenario2.offset_a == scenario.offset_a);
  REQUIRE(scenario2.kind == scenario.kind);
  REQUIRE(scenario2.seed == scenario.seed);

  const nlohmann::json j_model = model;
  const auto model2 = j_model.get<LatentModel>();
  REQUIRE(model2.content_matrix.data() == model.content_matrix.data());
  REQUIRE(model2.style_offsets == model.style_offsets);

  const nlohmann::json j_aligner = aligner;
  REQUIRE(j_aligner.get<SimAligner>().offset_estimate == aligner.offset_estimate);

  const nlohmann::json j_inspector = inspector;
  const auto inspector2 = j_inspector.get<SimInspector>();
  REQUIRE(inspector2.ensemble.size() == inspector.ensemble.size());
  const std::vector<double> x(10, 0.3);
  const std::vector<double> u(20, -0.2);
  REQUIRE(inspector_score(inspector2, x, u) == inspector_score(inspector, x, u));
}
