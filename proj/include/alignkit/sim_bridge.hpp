#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignkit/errors.hpp"
#include "alignkit/latent_sim.hpp"
#include "alignkit/squad.hpp"

// Plugs simulated aligners/inspectors into the squad engine. The text
// convention: an exchange's input is a JSON array of input features and its
// response is a JSON array of latent scores.

namespace alignkit::sim {

inline std::string encode_vector(const std::vector<double>& values) {
  return nlohmann::json(values).dump();
}

inline std::vector<double> decode_vector(const std::string& text,
                                         std::size_t expected_size,
                                         const char* what) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string(what) + " is not a JSON vector: " + e.what());
  }
  if (!parsed.is_array()) throw ContractError(std::string(what) + " is not a JSON array");
  auto values = parsed.get<std::vector<double>>();
  if (values.size() != expected_size) {
    throw ContractError(std::string(what) + " has length " +
                        std::to_string(values.size()) + ", expected " +
                        std::to_string(expected_size));
  }
  return values;
}

class SimInspectorBackend : public squad::InspectorBackend {
 public:
  explicit SimInspectorBackend(SimInspector inspector)
      : inspector_(std::move(inspector)) {}

  double score(const std::string& input, const std::string& response) override {
    const auto x = decode_vector(input, inspector_.d_in, "input vector");
    const auto u = decode_vector(response, inspector_.d_latent, "latent vector");
    return inspector_score(inspector_, x, u);
  }

 private:
  SimInspector inspector_;
};

class SimAlignerBackend : public squad::AlignerBackend {
 public:
  explicit SimAlignerBackend(SimAligner aligner) : aligner_(std::move(aligner)) {}

  std::string align(const std::string&, const std::string& response) override {
    auto u = decode_vector(response, aligner_.offset_estimate.size(), "latent vector");
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += aligner_.offset_estimate[i];
    return encode_vector(u);
  }

 private:
  SimAligner aligner_;
};

// A trained world bundled for replay: generation seeds ride along so any
// artifact can be regenerated exactly.
struct SimWorld {
  LatentModel model;
  ScenarioSpec scenario;
  std::vector<SimAligner> aligners;
  std::vector<SimInspector> inspectors;
  std::vector<std::string> criterion_names;
  std::uint64_t model_seed = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t noise_seed = 0;
  double noise_sigma = 0.0;
  std::size_t n_train = 0;
};

inline void to_json(nlohmann::json& j, const SimWorld& w) {
  j = nlohmann::json{{"model", w.model},
                     {"scenario", w.scenario},
                     {"aligners", w.aligners},
                     {"inspectors", w.inspectors},
                     {"criterion_names", w.criterion_names},
                     {"model_seed", w.model_seed},
                     {"data_seed", w.data_seed},
                     {"noise_seed", w.noise_seed},
                     {"noise_sigma", w.noise_sigma},
                     {"n_train", w.n_train}};
}

inline void from_json(const nlohmann::json& j, SimWorld& w) {
  j.at("model").get_to(w.model);
  j.at("scenario").get_to(w.scenario);
  j.at("aligners").get_to(w.aligners);
  j.at("inspectors").get_to(w.inspectors);
  j.at("criterion_names").get_to(w.criterion_names);
  j.at("model_seed").get_to(w.model_seed);
  j.at("data_seed").get_to(w.data_seed);
  j.at("noise_seed").get_to(w.noise_seed);
  j.at("noise_sigma").get_to(w.noise_sigma);
  j.at("n_train").get_to(w.n_train);
}

inline std::vector<squad::Criterion> world_criteria(const SimWorld& world) {
  if (world.criterion_names.size() != world.aligners.size() ||
      world.aligners.size() != world.inspectors.size()) {
    throw ContractError("SimWorld: criteria, aligners and inspectors must align");
  }
  std::vector<squad::Criterion> criteria;
  criteria.reserve(world.criterion_names.size());
  for (std::size_t k = 0; k < world.criterion_names.size(); ++k) {
    criteria.push_back(squad::Criterion{
        world.criterion_names[k],
        std::make_shared<SimInspectorBackend>(world.inspectors[k]),
        std::make_shared<SimAlignerBackend>(world.aligners[k])});
  }
  return criteria;
}

}  // namespace alignkit::sim
