#include "bayeseval/factory.hpp"

#include <set>
#include <string>

#include "bayeseval/errors.hpp"
#include "bayeseval/models/bernoulli_beta.hpp"
#include "bayeseval/models/matrix_factorization.hpp"
#include "bayeseval/models/normal_location.hpp"
#include "bayeseval/models/normal_mean_precision.hpp"
#include "bayeseval/models/poly_regression.hpp"

namespace bayeseval {

namespace {

void check_keys(const nlohmann::json& cfg, const std::set<std::string>& allowed, const char* what) {
    if (!cfg.is_object()) throw ConfigError("bad_config", std::string(what) + " config must be an object");
    for (const auto& [key, _] : cfg.items()) {
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown_key", std::string("unknown ") + what + " config key",
                              {{"key", key}});
    }
}

template <typename T>
T get(const nlohmann::json& cfg, const char* key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad_config", std::string("config key has the wrong type"), {{"key", key}});
    }
}

template <typename T>
T require(const nlohmann::json& cfg, const char* key) {
    if (!cfg.contains(key))
        throw ConfigError("bad_config", "missing required config key", {{"key", key}});
    try {
        return cfg.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad_config", std::string("config key has the wrong type"), {{"key", key}});
    }
}

}  // namespace

std::shared_ptr<ModelSpec> make_model(const nlohmann::json& cfg) {
    const std::string kind = require<std::string>(cfg, "model");
    if (kind == "matrix_factorization") {
        check_keys(cfg, {"model", "M", "N", "H", "rho", "mu"}, "model");
        return std::make_shared<MatrixFactorizationModel>(require<int>(cfg, "M"), require<int>(cfg, "N"),
                                                          require<int>(cfg, "H"), get(cfg, "rho", 10.0),
                                                          get(cfg, "mu", 10.0));
    }
    if (kind == "poly_regression") {
        check_keys(cfg, {"model", "K", "b", "c", "d"}, "model");
        PolyRegHyper hyper;
        hyper.K = get(cfg, "K", 3);
        hyper.b = get(cfg, "b", 2.0);
        hyper.c = get(cfg, "c", 0.01);
        hyper.d = get(cfg, "d", 0.01);
        return std::make_shared<PolyRegressionModel>(hyper);
    }
    if (kind == "bernoulli_beta" || kind == "bernoulli-beta") {
        check_keys(cfg, {"model", "alpha", "beta"}, "model");
        return std::make_shared<BernoulliBetaModel>(get(cfg, "alpha", 1.0), get(cfg, "beta", 1.0));
    }
    if (kind == "normal_location") {
        check_keys(cfg, {"model", "tau", "m0", "v0"}, "model");
        return std::make_shared<NormalLocationModel>(get(cfg, "tau", 1.0), get(cfg, "m0", 0.0),
                                                     get(cfg, "v0", 100.0));
    }
    if (kind == "normal_mean_precision") {
        check_keys(cfg, {"model", "a"}, "model");
        return std::make_shared<NormalMeanPrecisionModel>(get(cfg, "a", 1.0));
    }
    throw ConfigError("unknown_model", "no such model", {{"model", kind}});
}

std::shared_ptr<TruthOracle> make_truth(const nlohmann::json& cfg) {
    const std::string kind = require<std::string>(cfg, "truth");
    if (kind == "matrix_factorization") {
        check_keys(cfg, {"truth", "M", "N", "diag"}, "truth");
        return std::make_shared<MatrixFactorizationTruth>(require<int>(cfg, "M"), require<int>(cfg, "N"),
                                                          require<std::vector<double>>(cfg, "diag"));
    }
    if (kind == "poly_regression") {
        check_keys(cfg, {"truth", "a0", "s0"}, "truth");
        const auto a0 = require<std::vector<double>>(cfg, "a0");
        Eigen::VectorXd v(static_cast<Eigen::Index>(a0.size()));
        for (std::size_t i = 0; i < a0.size(); ++i) v[static_cast<Eigen::Index>(i)] = a0[i];
        return std::make_shared<PolyRegTruth>(v, require<double>(cfg, "s0"));
    }
    if (kind == "bernoulli") {
        check_keys(cfg, {"truth", "p"}, "truth");
        return std::make_shared<BernoulliTruth>(require<double>(cfg, "p"));
    }
    if (kind == "normal") {
        check_keys(cfg, {"truth", "mean", "var"}, "truth");
        return std::make_shared<NormalTruth>(require<double>(cfg, "mean"), require<double>(cfg, "var"));
    }
    throw ConfigError("unknown_truth", "no such truth", {{"truth", kind}});
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig base) {
    check_keys(j, {"chains", "burn_in", "draws_per_chain", "thinning", "proposal", "target_acceptance"},
               "sampler");
    base.chains = get(j, "chains", base.chains);
    base.burn_in = get(j, "burn_in", base.burn_in);
    base.draws_per_chain = get(j, "draws_per_chain", base.draws_per_chain);
    base.thinning = get(j, "thinning", base.thinning);
    base.target_acceptance = get(j, "target_acceptance", base.target_acceptance);
    if (j.contains("proposal")) {
        const auto p = require<std::string>(j, "proposal");
        if (p == "random-walk") base.proposal = Proposal::RandomWalk;
        else if (p == "gradient-assisted") base.proposal = Proposal::GradientAssisted;
        else throw ConfigError("bad_config", "unknown proposal kernel", {{"proposal", p}});
    }
    return base;
}

nlohmann::json sampler_config_to_json(const SamplerConfig& s) {
    return {{"chains", s.chains},
            {"burn_in", s.burn_in},
            {"draws_per_chain", s.draws_per_chain},
            {"thinning", s.thinning},
            {"proposal", s.proposal == Proposal::GradientAssisted ? "gradient-assisted" : "random-walk"},
            {"target_acceptance", s.target_acceptance}};
}

}  // namespace bayeseval
