#include "bayeseval/criteria.hpp"

#include <algorithm>
#include <cmath>

#include "bayeseval/errors.hpp"
#include "bayeseval/math.hpp"
#include "bayeseval/parallel.hpp"

namespace bayeseval {

namespace {

void require_untempered(const PosteriorDraws& draws) {
    if (draws.beta != 1.0)
        throw DomainError("tempered_posterior", "predictive requires untempered posterior",
                          {{"beta", draws.beta}});
}

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index i) {
    // col-major, so columns are contiguous
    return {m.col(i).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

double training_loss(const PosteriorDraws& draws) {
    require_untempered(draws);
    const Eigen::Index n = draws.loglik.cols();
    if (n == 0) throw DomainError("empty_data", "no observations in the draw set");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) acc += log_mean_exp(column(draws.loglik, i));
    return -acc / static_cast<double>(n);
}

FunctionalVariance functional_variance(const PosteriorDraws& draws) {
    const Eigen::Index s = draws.loglik.rows();
    if (s < 2) throw DomainError("too_few_draws", "variance needs at least two draws", {{"draws", s}});
    const Eigen::Index n = draws.loglik.cols();
    FunctionalVariance out;
    out.per_datum.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto col = draws.loglik.col(i);
        const double mean = col.mean();
        out.per_datum[i] = (col.array() - mean).square().sum() / static_cast<double>(s - 1);
    }
    out.total = out.per_datum.sum();
    return out;
}

WaicResult waic(const PosteriorDraws& draws) {
    require_untempered(draws);
    WaicResult r;
    r.t_n = training_loss(draws);
    r.variance = functional_variance(draws);
    r.value = r.t_n + r.variance.total / static_cast<double>(draws.loglik.cols());
    return r;
}

LooIsResult loo_is(const PosteriorDraws& draws) {
    require_untempered(draws);
    const Eigen::Index n = draws.loglik.cols();
    if (n == 0) throw DomainError("empty_data", "no observations in the draw set");
    LooIsResult r;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto col = draws.loglik.col(i);
        const Eigen::VectorXd neg = -col;
        const double lse = log_sum_exp({neg.data(), static_cast<std::size_t>(neg.size())});
        acc += lse - std::log(static_cast<double>(neg.size()));
        const double share = std::exp(neg.maxCoeff() - lse);
        r.max_weight_share = std::max(r.max_weight_share, share);
    }
    r.value = acc / static_cast<double>(n);
    r.concentrated = r.max_weight_share > 0.9;
    return r;
}

double loo_exact(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg) {
    const std::size_t n = data.size();
    if (n < 2)
        throw DomainError("too_few_points", "need at least two points to leave one out", {{"n", n}});
    std::vector<double> term(n, 0.0);
    parallel_for(n, resolve_threads(cfg.threads), [&](std::size_t i) {
        SamplerConfig local = cfg;
        local.seed = derive_seed(cfg.seed, {0x100, i});
        local.threads = 1;
        try {
            const PosteriorDraws draws = sample_tempered(model, data.excluding(i), local);
            const std::size_t abs = data.absolute_index(i);
            const DataView point(data.dataset(), abs, abs + 1);
            Eigen::MatrixXd ll(draws.theta.rows(), 1);
            model.log_density_matrix(point, draws.theta, ll);
            term[i] = -log_mean_exp(column(ll, 0));
        } catch (const DomainError& e) {
            nlohmann::json ctx = e.context();
            ctx["left_out"] = i;
            throw DomainError(e.code(), e.what(), ctx);
        }
    });
    double acc = 0.0;
    for (double t : term) acc += t;
    return acc / static_cast<double>(n);
}

double holdout(const ModelSpec& model, const PosteriorDraws& draws, const DataView& heldout) {
    require_untempered(draws);
    const std::size_t n2 = heldout.size();
    if (n2 == 0) throw DomainError("bad_split", "hold-out split is empty");
    Eigen::MatrixXd ll(draws.theta.rows(), static_cast<Eigen::Index>(n2));
    model.log_density_matrix(heldout, draws.theta, ll);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ll.cols(); ++i) acc += log_mean_exp(column(ll, i));
    const double h = -acc / static_cast<double>(n2);
    if (!std::isfinite(h))
        throw DomainError("non_finite_loglik", "hold-out log predictive is non-finite");
    return h;
}

double acv(double c_n1, double h_n2, std::size_t n1, std::size_t n2) {
    if (n1 < 1 || n2 < 1)
        throw ConfigError("bad_split", "both splits must be nonempty", {{"n1", n1}, {"n2", n2}});
    const double n = static_cast<double>(n1 + n2);
    return (static_cast<double>(n1) * c_n1 + static_cast<double>(n2) * h_n2) / n;
}

GenLossResult gen_loss(const ModelSpec& model, const PosteriorDraws& draws, const TruthOracle& truth,
                       GenLossDesign design, std::size_t m, std::uint64_t seed,
                       const DataView* inputs) {
    require_untempered(draws);
    if (m == 0) throw ConfigError("bad_config", "need at least one test point");
    Rng rng(derive_seed(seed, {0x6e}));

    Dataset test = [&]() {
        if (design == GenLossDesign::Random) return truth.sample(m, rng);
        if (inputs == nullptr)
            throw ConfigError("bad_config", "fixed-design generalization loss needs the training inputs");
        const auto* cond = dynamic_cast<const ConditionalTruth*>(&truth);
        if (cond == nullptr)
            throw ConfigError("bad_config", "fixed-design generalization loss needs a conditional truth",
                              {{"truth", truth.name()}});
        const int w = inputs->obs_size();
        RowMatrix rows(static_cast<Eigen::Index>(m), w);
        std::vector<double> buf(static_cast<std::size_t>(w));
        for (std::size_t j = 0; j < m; ++j) {
            cond->resample_response(inputs->row(j % inputs->size()), buf, rng);
            for (int k = 0; k < w; ++k) rows(static_cast<Eigen::Index>(j), k) = buf[static_cast<std::size_t>(k)];
        }
        return Dataset(inputs->dataset().shape(), std::move(rows));
    }();

    const Eigen::Index s = draws.theta.rows();
    const std::size_t chunk = std::max<std::size_t>(64, (4u << 20) / (8 * static_cast<std::size_t>(s)));
    Welford diff;  // log q(x) - log predictive(x)
    Eigen::MatrixXd ll;
    for (std::size_t j0 = 0; j0 < m; j0 += chunk) {
        const std::size_t j1 = std::min(m, j0 + chunk);
        const DataView block(test, j0, j1);
        ll.resize(s, static_cast<Eigen::Index>(j1 - j0));
        model.log_density_matrix(block, draws.theta, ll);
        for (std::size_t j = j0; j < j1; ++j) {
            const double lpred = log_mean_exp(column(ll, static_cast<Eigen::Index>(j - j0)));
            diff.add(truth.log_density(test.row(j)) - lpred);
        }
    }

    GenLossResult r;
    r.m = m;
    r.high_noise = m < 100;
    r.value = truth.entropy() + diff.mean();
    r.mc_se = diff.count() > 1 ? std::sqrt(diff.variance() / static_cast<double>(diff.count())) : 0.0;
    return r;
}

PluginCriteria plugin_criteria(double mle_loss, int d_eff, const RLCTSpec& rlct, std::size_t n,
                               const std::optional<RLCTSpec>& estimated) {
    if (!std::isfinite(mle_loss))
        throw DomainError("bad_params", "maximum-likelihood loss is not finite", {{"mle_loss", mle_loss}});
    if (n < 2) throw ConfigError("bad_config", "plug-in criteria need n >= 2", {{"n", n}});
    if (d_eff < 0) throw ConfigError("bad_config", "effective dimension must be nonnegative", {{"d_eff", d_eff}});
    const double nn = static_cast<double>(n);
    const double logn = std::log(nn);
    PluginCriteria out;
    out.aic = mle_loss + static_cast<double>(d_eff) / nn;
    out.bic = nn * mle_loss + 0.5 * static_cast<double>(d_eff) * logn;
    out.afe = nn * mle_loss + rlct.lambda * logn;
    if (estimated.has_value())
        out.sbic = nn * mle_loss + estimated->lambda * logn;
    else if (rlct.provenance == RlctProvenance::VolumeEstimate)
        out.sbic = out.afe;
    return out;
}

double dic(const ModelSpec& model, const PosteriorDraws& draws, const DataView& data) {
    require_untempered(draws);
    if (draws.theta.rows() < 2)
        throw DomainError("too_few_draws", "posterior mean needs at least two draws",
                          {{"draws", draws.theta.rows()}});
    const double mean_loss = -draws.loglik.mean();
    const Eigen::VectorXd theta_bar = draws.theta.colwise().mean().transpose();
    const double plugin =
        empirical_log_loss(model, data, {theta_bar.data(), static_cast<std::size_t>(theta_bar.size())});
    return 2.0 * mean_loss - plugin;
}

double wbic(const ModelSpec& model, const DataView& data, SamplerConfig cfg) {
    const std::size_t n = data.size();
    if (n < 3) throw DomainError("too_few_points", "needs log n > 1, so n >= 3", {{"n", n}});
    cfg.beta = 1.0 / std::log(static_cast<double>(n));
    const PosteriorDraws draws = sample_tempered(model, data, cfg);
    return -draws.loglik.sum() / static_cast<double>(draws.loglik.rows());
}

std::vector<double> ti_default_grid(std::size_t n) {
    if (n < 2) throw ConfigError("bad_config", "grid needs log n > 0", {{"n", n}});
    const double b0 = 1.0 / (10.0 * std::log(static_cast<double>(n)));
    std::vector<double> grid(21);
    for (int k = 0; k <= 20; ++k)
        grid[static_cast<std::size_t>(k)] = b0 * std::pow(1.0 / b0, static_cast<double>(k) / 20.0);
    grid.back() = 1.0;
    return grid;
}

TiResult ti_free_energy(const ModelSpec& model, const DataView& data, std::vector<double> beta_grid,
                        const SamplerConfig& cfg) {
    if (!model.proper_prior())
        throw DomainError("improper_prior", "free energy undefined / may be made infinite",
                          {{"model", model.name()}});
    if (beta_grid.empty()) throw ConfigError("bad_config", "empty temperature grid");
    for (std::size_t k = 0; k < beta_grid.size(); ++k) {
        if (!(beta_grid[k] > 0.0) || beta_grid[k] > 1.0)
            throw ConfigError("bad_config", "temperatures must lie in (0, 1]",
                              {{"index", k}, {"beta", beta_grid[k]}});
        if (k > 0 && !(beta_grid[k] > beta_grid[k - 1]))
            throw ConfigError("bad_config", "temperature grid must be strictly increasing", {{"index", k}});
    }
    if (std::abs(beta_grid.back() - 1.0) > 1e-9)
        throw ConfigError("bad_config", "temperature grid must end at beta = 1",
                          {{"last", beta_grid.back()}});

    TiResult out;
    out.grid.reserve(beta_grid.size() + 1);
    out.grid.push_back(0.0);
    out.integrand.reserve(beta_grid.size() + 1);

    // beta = 0: the tempered posterior is the prior itself
    {
        auto ctx = model.make_context(data);
        Rng rng(derive_seed(cfg.seed, {0x71}));
        const std::size_t r = static_cast<std::size_t>(cfg.chains) * static_cast<std::size_t>(cfg.draws_per_chain);
        std::vector<double> theta(static_cast<std::size_t>(model.dim()));
        Welford acc;
        for (std::size_t i = 0; i < r; ++i) {
            model.sample_prior(theta, rng);
            acc.add(-ctx->sum_log_density(theta));
        }
        out.integrand.push_back(acc.mean());
    }

    for (std::size_t k = 0; k < beta_grid.size(); ++k) {
        SamplerConfig local = cfg;
        local.beta = beta_grid[k];
        local.seed = derive_seed(cfg.seed, {0xb1, k});
        const PosteriorDraws draws = sample_tempered(model, data, local);
        out.grid.push_back(beta_grid[k]);
        out.integrand.push_back(-draws.loglik.sum() / static_cast<double>(draws.loglik.rows()));
    }

    double f = 0.0;
    for (std::size_t k = 0; k + 1 < out.grid.size(); ++k)
        f += 0.5 * (out.integrand[k] + out.integrand[k + 1]) * (out.grid[k + 1] - out.grid[k]);
    out.value = f;
    return out;
}

namespace {

void put(nlohmann::json& j, const char* key, const std::optional<double>& v) {
    if (v.has_value()) j[key] = *v;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (n) j["n"] = *n;
    if (n1) j["n1"] = *n1;
    if (n2) j["n2"] = *n2;
    put(j, "T_n", t_n);
    put(j, "W_n", w_n);
    put(j, "C_n", c_n);
    put(j, "H_n2", h_n2);
    put(j, "A_n", a_n);
    put(j, "G_n", g_n);
    put(j, "AIC", aic);
    put(j, "DIC", dic);
    put(j, "BIC", bic);
    put(j, "WBIC", wbic);
    put(j, "AFE", afe);
    put(j, "sBIC", sbic);
    put(j, "F_TI", f_ti);
    put(j, "F_n", f_n);
    put(j, "S_n", s_n);
    put(j, "S", s);
    put(j, "S_n2", s_n2);
    if (n && *n > 0) {
        const double nn = static_cast<double>(*n);
        if (bic) j["BIC/n"] = *bic / nn;
        if (wbic) j["WBIC/n"] = *wbic / nn;
        if (afe) j["AFE/n"] = *afe / nn;
        if (sbic) j["sBIC/n"] = *sbic / nn;
        if (f_ti) j["F_TI/n"] = *f_ti / nn;
        if (f_n) j["F_n/n"] = *f_n / nn;
    }
    put(j, "GE.E.", ge_e);
    put(j, "LOO.E.", loo_e);
    put(j, "WAIC.E.", waic_e);
    put(j, "AC.E.", ac_e);
    put(j, "HO.E.", ho_e);
    put(j, "AIC.E.", aic_e);
    put(j, "DIC.E.", dic_e);
    put(j, "AFE/n-S_n", afe_n_e);
    put(j, "BIC/n-S_n", bic_n_e);
    put(j, "WBIC/n-S_n", wbic_n_e);
    if (!warnings.empty()) j["warnings"] = warnings;
    return j;
}

void fill_error_forms(EvalReport& r) {
    auto need = [](const std::optional<double>& v, const char* what, const char* form) {
        if (!v.has_value())
            throw DomainError("missing_ingredient", std::string(form) + " needs " + what,
                              {{"missing", what}, {"form", form}});
        return *v;
    };
    auto need_count = [](const std::optional<std::size_t>& v, const char* what, const char* form) {
        if (!v.has_value())
            throw DomainError("missing_ingredient", std::string(form) + " needs " + what,
                              {{"missing", what}, {"form", form}});
        return static_cast<double>(*v);
    };

    if (r.g_n) r.ge_e = *r.g_n - need(r.s, "S", "GE.E.");
    if (r.c_n) r.loo_e = *r.c_n - need(r.s_n, "S_n", "LOO.E.");
    if (r.w_n) r.waic_e = *r.w_n - need(r.s_n, "S_n", "WAIC.E.");
    if (r.a_n) {
        const double n1 = need_count(r.n1, "n1", "AC.E.");
        const double n2 = need_count(r.n2, "n2", "AC.E.");
        r.ac_e = n1 / (n1 + n2) * (*r.a_n - need(r.s_n, "S_n", "AC.E."));
    }
    if (r.h_n2) {
        const double n1 = need_count(r.n1, "n1", "HO.E.");
        const double n2 = need_count(r.n2, "n2", "HO.E.");
        r.ho_e = n1 / (n1 + n2) * (*r.h_n2 - need(r.s_n2, "S_n2", "HO.E."));
    }
    if (r.aic) r.aic_e = *r.aic - need(r.s_n, "S_n", "AIC.E.");
    if (r.dic) r.dic_e = *r.dic - need(r.s_n, "S_n", "DIC.E.");
    const auto per_n = [&](const std::optional<double>& total, const char* form) -> std::optional<double> {
        if (!total) return std::nullopt;
        const double nn = need_count(r.n, "n", form);
        return *total / nn - need(r.s_n, "S_n", form);
    };
    r.afe_n_e = per_n(r.afe, "AFE/n-S_n");
    r.bic_n_e = per_n(r.bic, "BIC/n-S_n");
    r.wbic_n_e = per_n(r.wbic, "WBIC/n-S_n");
}

}  // namespace bayeseval
