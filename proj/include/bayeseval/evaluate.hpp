#pragma once

#include <json.hpp>

#include "bayeseval/criteria.hpp"

namespace bayeseval {

struct EvalOutcome {
    EvalReport report;
    nlohmann::json diagnostics = nlohmann::json::object();
};

// One-shot evaluation of a configured model on a dataset.
//
// Config keys:
//   model    factory fragment (required)
//   data     [x1, x2, ...] | [[row], ...] | {"shape": [...], "items": [...]}
//   truth    factory fragment; with "n", draws the dataset instead of "data"
//   n        sample size when drawing from a truth
//   n1       optional split size: adds C_n1/H_n2/A_n to the report
//   seed     master seed (default 0)
//   sampler  sampler config fragment
//   ti       thermodynamic-integration free energy (default false)
//   exact    use conjugate closed forms when the model has them (default true)
//
// Conjugate models fill the report from closed forms; everything else runs
// the posterior sampler.  When the data came from a configured truth the
// entropy-referenced error forms are filled in too.
EvalOutcome evaluate_config(const nlohmann::json& cfg);

}  // namespace bayeseval
