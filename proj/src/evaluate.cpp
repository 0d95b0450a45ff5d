#include "bayeseval/evaluate.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "bayeseval/errors.hpp"
#include "bayeseval/factory.hpp"
#include "bayeseval/models/bernoulli_beta.hpp"
#include "bayeseval/models/normal_location.hpp"
#include "bayeseval/models/poly_regression.hpp"
#include "bayeseval/rng.hpp"

namespace bayeseval {

namespace {

Dataset dataset_from_config(const nlohmann::json& cfg, const ModelSpec& model,
                            std::shared_ptr<TruthOracle>& truth_out) {
    if (cfg.contains("data")) {
        const auto& d = cfg.at("data");
        if (d.is_object()) return Dataset::from_json(d);
        if (!d.is_array() || d.empty())
            throw ConfigError("bad_config", "data must be a non-empty array or a {shape, items} object");
        if (d.front().is_array()) {
            std::vector<std::vector<double>> rows;
            for (const auto& r : d) rows.push_back(r.get<std::vector<double>>());
            return Dataset::from_rows(model.obs_shape(), rows);
        }
        const auto scalars = d.get<std::vector<double>>();
        return Dataset::from_scalars(scalars);
    }
    if (cfg.contains("truth")) {
        if (!cfg.contains("n"))
            throw ConfigError("bad_config", "drawing from a truth needs a sample size",
                              {{"key", "n"}});
        truth_out = make_truth(cfg.at("truth"));
        Rng rng(derive_seed(cfg.value("seed", std::uint64_t{0}), {0xda}));
        return truth_out->sample(cfg.at("n").get<std::size_t>(), rng);
    }
    throw ConfigError("bad_config", "missing required config key", {{"key", "data"}});
}

nlohmann::json diagnostics_json(const PosteriorDraws& draws) {
    double max_rhat = 0.0;
    for (Eigen::Index k = 0; k < draws.diagnostics.rhat.size(); ++k)
        max_rhat = std::max(max_rhat, draws.diagnostics.rhat[k]);
    double min_ess = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < draws.diagnostics.ess.size(); ++k)
        min_ess = std::min(min_ess, draws.diagnostics.ess[k]);
    return {{"max_rhat", max_rhat},
            {"min_ess", min_ess},
            {"acceptance", draws.diagnostics.acceptance}};
}

}  // namespace

EvalOutcome evaluate_config(const nlohmann::json& cfg) {
    static const std::set<std::string> allowed = {"model", "data", "truth", "n",  "n1",
                                                  "seed",  "sampler", "ti", "exact"};
    if (!cfg.is_object()) throw ConfigError("bad_config", "eval config must be an object");
    for (const auto& [key, _] : cfg.items())
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown_key", "unknown eval config key", {{"key", key}});
    if (!cfg.contains("model"))
        throw ConfigError("bad_config", "missing required config key", {{"key", "model"}});

    const auto model = make_model(cfg.at("model"));
    std::shared_ptr<TruthOracle> truth;
    const Dataset data = dataset_from_config(cfg, *model, truth);

    const std::vector<int> shape = model->obs_shape();
    const int obs = std::accumulate(shape.begin(), shape.end(), 1, [](int a, int b) { return a * b; });
    if (obs != data.obs_size())
        throw ConfigError("bad_config", "data shape does not match the model observation shape",
                          {{"model_obs", obs}, {"data_obs", data.obs_size()}});

    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    const bool want_exact = cfg.value("exact", true);
    const bool want_ti = cfg.value("ti", false);
    const std::size_t n = data.size();
    std::size_t n1 = cfg.value("n1", std::size_t{0});
    if (n1 >= n)
        throw ConfigError("bad_split", "split size must leave held-out data", {{"n1", n1}, {"n", n}});

    EvalOutcome out;
    EvalReport& r = out.report;
    r.n = n;
    if (n1 > 0) {
        r.n1 = n1;
        r.n2 = n - n1;
    }

    bool done_exact = false;
    if (want_exact) {
        if (const auto* bb = dynamic_cast<const BernoulliBetaModel*>(model.get())) {
            const auto q = bb->quadrature(data.view());
            r.t_n = q.t_n;
            r.w_n = q.w_n;
            r.c_n = q.c_n;
            r.dic = q.dic;
            r.f_n = bb->free_energy(data.view());
            if (n1 > 0) {
                const auto [first, second] = data.split(n1);
                const double c_n1 = bb->quadrature(first).c_n;
                const double p_one = bb->predictive_one(first);
                double h = 0.0;
                for (std::size_t i = 0; i < second.size(); ++i)
                    h -= second.row(i)[0] > 0.5 ? std::log(p_one) : std::log1p(-p_one);
                r.h_n2 = h / static_cast<double>(second.size());
                r.a_n = acv(c_n1, *r.h_n2, n1, n - n1);
            }
            done_exact = true;
        } else if (const auto* nl = dynamic_cast<const NormalLocationModel*>(model.get())) {
            const auto e = nl->exact_eval(data.view());
            r.t_n = e.t_n;
            r.w_n = e.w_n;
            r.c_n = e.c_n;
            r.dic = e.dic;
            r.f_n = nl->free_energy(data.view());
            if (n1 > 0) {
                const auto [first, second] = data.split(n1);
                r.h_n2 = nl->exact_holdout(first, second);
                r.a_n = acv(nl->exact_loo(first), *r.h_n2, n1, n - n1);
            }
            done_exact = true;
        } else if (const auto* pr = dynamic_cast<const PolyRegressionModel*>(model.get())) {
            const auto e = polyreg_exact_eval(*pr, data.view());
            r.t_n = e.t_n;
            r.w_n = e.w_n;
            r.c_n = polyreg_exact_loo(*pr, data.view());
            r.dic = e.dic;
            if (pr->proper_prior()) r.f_n = polyreg_free_energy(*pr, data.view());
            else r.warnings.push_back("improper prior: free energy omitted");
            if (n1 > 0) {
                const auto [first, second] = data.split(n1);
                r.h_n2 = polyreg_exact_holdout(*pr, first, second);
                r.a_n = acv(polyreg_exact_loo(*pr, first), *r.h_n2, n1, n - n1);
            }
            done_exact = true;
        }
    }

    SamplerConfig scfg;
    if (cfg.contains("sampler")) scfg = sampler_config_from_json(cfg.at("sampler"), scfg);
    scfg.threads = 1;

    if (!done_exact) {
        scfg.seed = derive_seed(seed, {0x51});
        const PosteriorDraws draws = sample_tempered(*model, data.view(), scfg);
        const WaicResult w = waic(draws);
        r.t_n = w.t_n;
        r.w_n = w.value;
        r.c_n = loo_is(draws).value;
        r.dic = dic(*model, draws, data.view());
        for (const auto& warning : draws.diagnostics.warnings) r.warnings.push_back(warning);
        out.diagnostics["full"] = diagnostics_json(draws);
        if (n1 > 0) {
            const auto [first, second] = data.split(n1);
            SamplerConfig half = scfg;
            half.seed = derive_seed(seed, {0x52});
            const PosteriorDraws draws1 = sample_tempered(*model, first, half);
            r.h_n2 = holdout(*model, draws1, second);
            r.a_n = acv(loo_is(draws1).value, *r.h_n2, n1, n - n1);
            for (const auto& warning : draws1.diagnostics.warnings) r.warnings.push_back(warning);
            out.diagnostics["split"] = diagnostics_json(draws1);
        }
    }

    if (want_ti) {
        SamplerConfig ti_cfg = scfg;
        ti_cfg.seed = seed;
        r.f_ti = ti_free_energy(*model, data.view(), ti_default_grid(n), ti_cfg).value;
    }

    if (truth) {
        r.s_n = empirical_entropy(*truth, data.view());
        r.s = truth->entropy();
        if (n1 > 0) r.s_n2 = empirical_entropy(*truth, data.split(n1).second);
        fill_error_forms(r);
    }
    return out;
}

}  // namespace bayeseval
