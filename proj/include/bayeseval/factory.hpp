#pragma once

#include <memory>

#include <json.hpp>

#include "bayeseval/model.hpp"
#include "bayeseval/sampler.hpp"

namespace bayeseval {

// Build a model from a config fragment like
//   {"model": "matrix_factorization", "M": 8, "N": 8, "H": 6, "rho": 10, "mu": 10}
// Unknown keys are rejected so config typos fail loudly.
std::shared_ptr<ModelSpec> make_model(const nlohmann::json& cfg);

// Build a truth from a fragment like
//   {"truth": "matrix_factorization", "M": 8, "N": 8, "diag": [1,1,0,0,0,0,0,0]}
std::shared_ptr<TruthOracle> make_truth(const nlohmann::json& cfg);

// Sampler config fragment <-> JSON.  Seed and thread count are runtime
// concerns and stay out of the serialized form.
SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig base = SamplerConfig{});
nlohmann::json sampler_config_to_json(const SamplerConfig& s);

}  // namespace bayeseval
