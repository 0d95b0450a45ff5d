#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bayeseval/dataset.hpp"
#include "bayeseval/model.hpp"
#include "bayeseval/rlct.hpp"
#include "bayeseval/sampler.hpp"

namespace bayeseval {

// ---- predictive losses from one set of posterior draws ----

// T_n = -(1/n) sum_i log( (1/S) sum_s exp loglik(s,i) )
double training_loss(const PosteriorDraws& draws);

struct FunctionalVariance {
    double total = 0.0;       // sum_i V_theta[log p(X_i | theta)]
    Eigen::VectorXd per_datum;
};
FunctionalVariance functional_variance(const PosteriorDraws& draws);

struct WaicResult {
    double value = 0.0;       // W_n = T_n + total/n
    double t_n = 0.0;
    FunctionalVariance variance;
};
WaicResult waic(const PosteriorDraws& draws);

// C_n = (1/n) sum_i log( (1/S) sum_s exp(-loglik(s,i)) ): importance-sampling
// LOO via the posterior mean of the inverse likelihood.
struct LooIsResult {
    double value = 0.0;
    double max_weight_share = 0.0;   // worst single-draw share of any per-datum weight sum
    bool concentrated = false;       // share above 0.9 somewhere
};
LooIsResult loo_is(const PosteriorDraws& draws);

// n refits, each leaving one point out; the brute-force oracle for loo_is.
double loo_exact(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg);

// H_{n2}: predictive loss on a disjoint split, draws fitted on the first.
double holdout(const ModelSpec& model, const PosteriorDraws& draws, const DataView& heldout);

// A_n = (n1 C_{n1} + n2 H_{n2}) / (n1 + n2)
double acv(double c_n1, double h_n2, std::size_t n1, std::size_t n2);

// ---- generalization loss ----

enum class GenLossDesign { Random, FixedInputs };

struct GenLossResult {
    double value = 0.0;
    double mc_se = 0.0;
    std::size_t m = 0;
    bool high_noise = false;   // m < 100
};

// G_n = -E_q[log predictive].  Estimated with the truth's entropy as a
// control variate: G = S + mean_j[log q(x_j) - log pred(x_j)], which removes
// almost all of the oracle noise when the predictive is close to the truth.
// FixedInputs cycles over `inputs` covariates with fresh responses and needs
// a ConditionalTruth.
GenLossResult gen_loss(const ModelSpec& model, const PosteriorDraws& draws, const TruthOracle& truth,
                       GenLossDesign design, std::size_t m, std::uint64_t seed,
                       const DataView* inputs = nullptr);

// ---- plug-in criteria from a maximum-likelihood fit ----

struct PluginCriteria {
    double aic = 0.0;                // per-sample loss scale
    double bic = 0.0;                // total
    double afe = 0.0;                // total, from rlct.lambda
    std::optional<double> sbic;      // total, from an estimated lambda when available
};
// AIC = L_n(mle) + d_eff/n; BIC = n L_n(mle) + (d_eff/2) log n;
// AFE = n L_n(mle) + lambda log n; sBIC same with the estimated lambda.
PluginCriteria plugin_criteria(double mle_loss, int d_eff, const RLCTSpec& rlct, std::size_t n,
                               const std::optional<RLCTSpec>& estimated = std::nullopt);

// per-sample DIC = 2 E_theta[L_n(theta)] - L_n(posterior mean of theta)
double dic(const ModelSpec& model, const PosteriorDraws& draws, const DataView& data);

// E_theta^{(beta)}[n L_n] at beta = 1/log n
double wbic(const ModelSpec& model, const DataView& data, SamplerConfig cfg);

// 21 geometric points from 1/(10 log n) up to 1
std::vector<double> ti_default_grid(std::size_t n);

struct TiResult {
    double value = 0.0;               // F_n estimate
    std::vector<double> grid;         // includes the beta = 0 endpoint
    std::vector<double> integrand;    // E^{(beta)}[n L_n] at each grid point
};
// Thermodynamic integration: F_n = int_0^1 E^{(beta)}[n L_n] d(beta) by
// trapezoid, with the beta = 0 endpoint taken directly from the prior.
TiResult ti_free_energy(const ModelSpec& model, const DataView& data, std::vector<double> beta_grid,
                        const SamplerConfig& cfg);

// ---- assembled report ----

struct EvalReport {
    std::optional<std::size_t> n, n1, n2;

    std::optional<double> t_n, w_n, c_n, h_n2, a_n, g_n;
    std::optional<double> aic, dic;                     // per-sample loss scale
    std::optional<double> bic, wbic, afe, sbic, f_ti;   // totals
    std::optional<double> f_n;                          // exact free energy, conjugate models only
    std::optional<double> s_n, s, s_n2;

    // entropy-reduced error forms
    std::optional<double> ge_e, loo_e, waic_e, ac_e, ho_e, aic_e, dic_e;
    std::optional<double> afe_n_e, bic_n_e, wbic_n_e;

    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// Fills every error form whose estimator is present; a present estimator
// with a missing entropy ingredient is an error naming the ingredient.
void fill_error_forms(EvalReport& r);

}  // namespace bayeseval
