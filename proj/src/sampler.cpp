#include "bayeseval/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "bayeseval/errors.hpp"
#include "bayeseval/math.hpp"
#include "bayeseval/parallel.hpp"

namespace bayeseval {

void SamplerConfig::validate() const {
    if (chains < 1) throw ConfigError("bad_config", "need at least one chain", {{"chains", chains}});
    if (draws_per_chain < 1)
        throw ConfigError("bad_config", "need at least one draw per chain", {{"draws_per_chain", draws_per_chain}});
    if (thinning < 1) throw ConfigError("bad_config", "thinning must be >= 1", {{"thinning", thinning}});
    if (burn_in < 0) throw ConfigError("bad_config", "burn_in must be >= 0", {{"burn_in", burn_in}});
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ConfigError("bad_config", "inverse temperature must be positive and finite", {{"beta", beta}});
    if (target_acceptance < 0.0 || target_acceptance >= 1.0)
        throw ConfigError("bad_config", "target acceptance must lie in [0, 1)",
                          {{"target_acceptance", target_acceptance}});
}

double SamplerConfig::resolved_target() const {
    if (target_acceptance > 0.0) return target_acceptance;
    return proposal == Proposal::GradientAssisted ? 0.574 : 0.234;
}

namespace {

struct Target {
    const ModelSpec& model;
    const LikelihoodContext& ctx;
    double beta;
    bool with_grad;

    double operator()(const Eigen::VectorXd& theta) const {
        std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
        return beta * ctx.sum_log_density(th) + model.log_prior(th);
    }

    // likelihood and prior parts kept separate so the burn-in schedule can
    // recombine them under a changing inverse temperature without re-evaluating
    void parts(const Eigen::VectorXd& theta, double& lik, double& pri) const {
        std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
        lik = ctx.sum_log_density(th);
        pri = model.log_prior(th);
    }

    void parts_and_grad(const Eigen::VectorXd& theta, double& lik, double& pri,
                        Eigen::VectorXd& glik, Eigen::VectorXd& gpri) const {
        std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
        lik = ctx.sum_log_density(th);
        pri = model.log_prior(th);
        ctx.grad_sum_log_density(th, {glik.data(), static_cast<std::size_t>(glik.size())});
        model.grad_log_prior(th, {gpri.data(), static_cast<std::size_t>(gpri.size())});
    }
};

Eigen::VectorXd initial_point(const ModelSpec& model, const Target& target, Rng& rng) {
    const int d = model.dim();
    Eigen::VectorXd theta(d);
    for (int attempt = 0; attempt < 100; ++attempt) {
        if (model.proper_prior()) {
            model.sample_prior({theta.data(), static_cast<std::size_t>(d)}, rng);
        } else {
            for (int k = 0; k < d; ++k) theta[k] = rng.normal();
        }
        if (std::isfinite(target(theta))) return theta;
    }
    throw DomainError("bad_init", "bad init",
                      {{"model", model.name()}, {"attempts", 100}});
}

// Tamed drift keeps the proposal mean bounded, so the correction stays a
// deterministic function of the current point and detailed balance holds.
Eigen::VectorXd tamed_drift(const Eigen::VectorXd& preconditioned_grad, double h, double cap) {
    Eigen::VectorXd drift = 0.5 * h * h * preconditioned_grad;
    const double tame = 1.0 / (1.0 + drift.norm() / cap);
    return tame * drift;
}

// proposal x ~ N(mean, h^2 L L^T), up to constants shared by both directions
double proposal_logpdf_chol(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& chol, double h) {
    const Eigen::VectorXd y = chol.triangularView<Eigen::Lower>().solve(x - mean);
    return -0.5 * y.squaredNorm() / (h * h);
}

struct KernelState {
    Rng rng{0};
    Eigen::VectorXd theta, glik, gpri, scale;
    double lik = 0.0, pri = 0.0;
    Eigen::MatrixXd cov, chol;
    double log_h = 0.0;
};

struct StepResult {
    double alpha = 0.0;
    bool accepted = false;
};

// one Metropolis-Hastings step; updates the state in place on acceptance
StepResult mh_step(const Target& target, KernelState& s, bool grad_based, double beta,
                   Eigen::VectorXd& prop, Eigen::VectorXd& plik_grad, Eigen::VectorXd& ppri_grad,
                   Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    const int d = static_cast<int>(s.theta.size());
    const double h = std::exp(s.log_h);
    for (int k = 0; k < d; ++k) z[k] = s.rng.normal();
    const double logp = beta * s.lik + s.pri;
    double log_ratio;
    double prop_lik = 0.0, prop_pri = 0.0;
    if (grad_based) {
        grad = beta * s.glik + s.gpri;
        const double trust = 10.0 * h * std::sqrt(static_cast<double>(d));
        const Eigen::VectorXd drift = tamed_drift(s.cov * grad, h, trust);
        const Eigen::VectorXd mean_fwd = s.theta + drift;
        prop = mean_fwd + h * (s.chol * z);
        target.parts_and_grad(prop, prop_lik, prop_pri, plik_grad, ppri_grad);
        const Eigen::VectorXd prop_grad = beta * plik_grad + ppri_grad;
        const Eigen::VectorXd mean_rev = prop + tamed_drift(s.cov * prop_grad, h, trust);
        log_ratio = beta * prop_lik + prop_pri - logp +
                    proposal_logpdf_chol(s.theta, mean_rev, s.chol, h) -
                    proposal_logpdf_chol(prop, mean_fwd, s.chol, h);
    } else {
        prop = s.theta + h * s.scale.cwiseProduct(z);
        target.parts(prop, prop_lik, prop_pri);
        log_ratio = beta * prop_lik + prop_pri - logp;
    }
    if (!std::isfinite(log_ratio)) log_ratio = -std::numeric_limits<double>::infinity();
    StepResult r;
    r.alpha = std::exp(std::min(0.0, log_ratio));
    r.accepted = s.rng.uniform() < r.alpha;
    if (r.accepted) {
        s.theta.swap(prop);
        s.lik = prop_lik;
        s.pri = prop_pri;
        if (grad_based) {
            s.glik.swap(plik_grad);
            s.gpri.swap(ppri_grad);
        }
    }
    return r;
}

// burn-in: step-size adaptation toward the target acceptance, a Welford
// window over the second half for the proposal geometry, and a Polyak
// average of the log step size over the final eighth
KernelState burn_phase(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg,
                       std::uint64_t chain_seed) {
    const int d = model.dim();
    const bool grad_based = cfg.proposal == Proposal::GradientAssisted;
    if (grad_based && !model.has_gradients())
        throw ConfigError("no_gradient", "model has no gradients; use the random walk proposal",
                          {{"model", model.name()}});
    auto ctx = model.make_context(data);
    const Target target{model, *ctx, cfg.beta, grad_based};
    const double accept_goal = cfg.resolved_target();

    KernelState s;
    s.rng = Rng(chain_seed);
    s.theta = initial_point(model, target, s.rng);
    s.glik.resize(d);
    s.gpri.resize(d);
    if (grad_based) target.parts_and_grad(s.theta, s.lik, s.pri, s.glik, s.gpri);
    else target.parts(s.theta, s.lik, s.pri);

    // random walk: diagonal proposal scales; gradient-assisted: a dense
    // covariance factor, which the anisotropic posteriors need
    s.scale = Eigen::VectorXd::Ones(d);
    s.cov = Eigen::MatrixXd::Identity(d, d);
    s.chol = Eigen::MatrixXd::Identity(d, d);
    s.log_h = std::log(grad_based ? 0.8 / std::pow(static_cast<double>(d), 1.0 / 6.0)
                                  : 2.38 / std::sqrt(static_cast<double>(d)));

    Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd w_m2 = Eigen::MatrixXd::Zero(d, d);
    long w_count = 0;
    long adapt_t = 0;
    double lh_sum = 0.0;
    long lh_cnt = 0;
    const long burn = cfg.burn_in;

    Eigen::VectorXd prop(d), plik_grad(d), ppri_grad(d), z(d), grad(d);
    for (long it = 0; it < burn; ++it) {
        const StepResult st =
            mh_step(target, s, grad_based, cfg.beta, prop, plik_grad, ppri_grad, z, grad);
        ++adapt_t;
        s.log_h += std::pow(static_cast<double>(adapt_t), -0.6) * (st.alpha - accept_goal);
        if (it >= (7 * burn) / 8) {
            lh_sum += s.log_h;
            ++lh_cnt;
        }
        if (it >= burn / 4) {
            ++w_count;
            const Eigen::VectorXd delta = s.theta - w_mean;
            w_mean += delta / static_cast<double>(w_count);
            if (grad_based)
                w_m2.selfadjointView<Eigen::Lower>().rankUpdate(delta, s.theta - w_mean, 0.5);
            else w_m2.diagonal() += delta.cwiseProduct(s.theta - w_mean);
        }
        const bool refresh_point = burn >= 8 && (it + 1) % std::max<long>(burn / 8, 1) == 0 &&
                                   (it + 1) >= burn / 2 && (it + 1) < burn;
        if (w_count > 2 * d && refresh_point) {
            const double k = static_cast<double>(w_count - 1);
            if (grad_based) {
                s.cov = Eigen::MatrixXd(w_m2.selfadjointView<Eigen::Lower>()) / k;
                // ridge toward the diagonal so a short window cannot
                // produce a degenerate factor
                s.cov.diagonal().array() += 1e-3 * s.cov.diagonal().mean() + 1e-12;
                // clamp the top of the spectrum: the widest directions are
                // the weakly identified ones, where local step calibration
                // drifts; capping them keeps acceptance uniform across the
                // support at the cost of a slower walk along those axes
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.cov);
                Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-12);
                const double cap = 100.0 * ev[(d - 1) / 2];
                ev = ev.cwiseMin(cap);
                s.cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
                const Eigen::LLT<Eigen::MatrixXd> llt(s.cov);
                if (llt.info() == Eigen::Success) s.chol = llt.matrixL();
                else {
                    s.cov = s.cov.diagonal().asDiagonal();
                    s.chol = s.cov.diagonal().cwiseSqrt().asDiagonal();
                }
            } else {
                for (int j = 0; j < d; ++j)
                    s.scale[j] = std::sqrt(std::max(w_m2(j, j) / k, 1e-12));
            }
            adapt_t = 16;  // restart the step-size clock under the new scales
        }
    }
    // freeze the averaged step size, not the last iterate: on targets where
    // acceptance depends on position the final value is noisy
    if (lh_cnt > 0) s.log_h = lh_sum / static_cast<double>(lh_cnt);
    return s;
}

// retained phase: fixed kernel, thinned draws
ChainResult retain_phase(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg,
                         KernelState& s) {
    const int d = model.dim();
    const bool grad_based = cfg.proposal == Proposal::GradientAssisted;
    auto ctx = model.make_context(data);
    const Target target{model, *ctx, cfg.beta, grad_based};
    const long steps = static_cast<long>(cfg.draws_per_chain) * cfg.thinning;

    ChainResult out;
    out.theta.resize(cfg.draws_per_chain, d);
    long kept = 0;
    long accepted = 0;
    Eigen::VectorXd prop(d), plik_grad(d), ppri_grad(d), z(d), grad(d);
    for (long it = 0; it < steps; ++it) {
        const StepResult st =
            mh_step(target, s, grad_based, cfg.beta, prop, plik_grad, ppri_grad, z, grad);
        if (st.accepted) ++accepted;
        if ((it + 1) % cfg.thinning == 0 && kept < cfg.draws_per_chain) {
            out.theta.row(kept) = s.theta.transpose();
            ++kept;
        }
    }
    out.acceptance = steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
    return out;
}

}  // namespace

ChainResult run_chain(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg,
                      std::uint64_t chain_seed) {
    KernelState s = burn_phase(model, data, cfg, chain_seed);
    return retain_phase(model, data, cfg, s);
}

namespace {

// batch-means ESS for one chain and coordinate; the estimator needs only one
// pass over at most sqrt(T) batch means
double chain_ess(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const Eigen::Index t = x.size();
    if (t < 4) return static_cast<double>(t);
    const Eigen::Index b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(t))));
    const Eigen::Index nb = t / b;
    const Eigen::Index used = nb * b;
    const double mean = x.head(used).mean();
    const double var = (x.head(used).array() - mean).square().sum() / static_cast<double>(used - 1);
    if (!(var > 0.0)) return static_cast<double>(t);
    double bm_var = 0.0;
    for (Eigen::Index j = 0; j < nb; ++j) {
        const double bm = x.segment(j * b, b).mean();
        bm_var += (bm - mean) * (bm - mean);
    }
    bm_var /= static_cast<double>(nb - 1);
    if (!(bm_var > 0.0)) return static_cast<double>(t);
    const double ess = static_cast<double>(used) * var / (static_cast<double>(b) * bm_var);
    return std::min(ess, static_cast<double>(t));
}

}  // namespace

PosteriorDraws sample_tempered(const ModelSpec& model, const DataView& data, const SamplerConfig& cfg) {
    cfg.validate();
    const int d = model.dim();
    const Eigen::Index n = static_cast<Eigen::Index>(data.size());
    const Eigen::Index per = cfg.draws_per_chain;
    const Eigen::Index S = per * cfg.chains;

    PosteriorDraws draws;
    draws.beta = cfg.beta;
    draws.chains = cfg.chains;
    draws.draws_per_chain = cfg.draws_per_chain;
    draws.theta.resize(S, d);
    draws.diagnostics.acceptance.assign(cfg.chains, 0.0);

    std::vector<KernelState> states(static_cast<std::size_t>(cfg.chains));
    parallel_for(static_cast<std::size_t>(cfg.chains), resolve_threads(cfg.threads), [&](std::size_t c) {
        const std::uint64_t chain_seed = derive_seed(cfg.seed, {0x5a, static_cast<std::uint64_t>(c)});
        states[c] = burn_phase(model, data, cfg, chain_seed);
    });

    // near-flat shelves (rank-deficient fits) can hold a chain far below the
    // bulk for the whole run; burn-in ends with a consensus check and any
    // chain trailing the best final target value by a wide margin restarts
    // the retained phase from the best chain's state and kernel
    if (cfg.chains > 1) {
        std::size_t best = 0;
        double best_logp = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < states.size(); ++c) {
            const double lp = cfg.beta * states[c].lik + states[c].pri;
            if (lp > best_logp) {
                best_logp = lp;
                best = c;
            }
        }
        for (std::size_t c = 0; c < states.size(); ++c) {
            if (c == best) continue;
            const double lp = cfg.beta * states[c].lik + states[c].pri;
            if (best_logp - lp > 10.0) {
                const KernelState& sb = states[best];
                KernelState& sc = states[c];
                sc.theta = sb.theta;
                sc.lik = sb.lik;
                sc.pri = sb.pri;
                sc.glik = sb.glik;
                sc.gpri = sb.gpri;
                sc.scale = sb.scale;
                sc.cov = sb.cov;
                sc.chol = sb.chol;
                sc.log_h = sb.log_h;
            }
        }
    }

    parallel_for(static_cast<std::size_t>(cfg.chains), resolve_threads(cfg.threads), [&](std::size_t c) {
        ChainResult r = retain_phase(model, data, cfg, states[c]);
        draws.theta.middleRows(static_cast<Eigen::Index>(c) * per, per) = r.theta;
        draws.diagnostics.acceptance[c] = r.acceptance;
    });

    bool any_alive = false;
    for (double a : draws.diagnostics.acceptance) any_alive = any_alive || a >= 0.01;
    if (!any_alive)
        throw DomainError("sampler_stuck", "sampler stuck",
                          {{"model", model.name()}, {"acceptance", draws.diagnostics.acceptance}});

    // split-Rhat and batch-means ESS, per coordinate
    draws.diagnostics.rhat.resize(d);
    draws.diagnostics.ess.resize(d);
    const Eigen::Index half = per / 2;
    double worst_rhat = 1.0;
    for (int k = 0; k < d; ++k) {
        double ess = 0.0;
        for (int c = 0; c < cfg.chains; ++c)
            ess += chain_ess(draws.theta.col(k).segment(static_cast<Eigen::Index>(c) * per, per));
        draws.diagnostics.ess[k] = ess;

        if (half < 2) {
            draws.diagnostics.rhat[k] = 1.0;
            continue;
        }
        const int m = 2 * cfg.chains;
        double mean_of_means = 0.0, within = 0.0;
        std::vector<double> means(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            const Eigen::Index start = static_cast<Eigen::Index>(j / 2) * per + (j % 2) * half;
            auto seg = draws.theta.col(k).segment(start, half);
            const double mu = seg.mean();
            means[static_cast<std::size_t>(j)] = mu;
            within += (seg.array() - mu).square().sum() / static_cast<double>(half - 1);
            mean_of_means += mu;
        }
        within /= static_cast<double>(m);
        mean_of_means /= static_cast<double>(m);
        double between = 0.0;
        for (double mu : means) between += (mu - mean_of_means) * (mu - mean_of_means);
        between *= static_cast<double>(half) / static_cast<double>(m - 1);
        if (!(within > 0.0)) {
            draws.diagnostics.rhat[k] = 1.0;
            continue;
        }
        const double var_plus =
            (static_cast<double>(half - 1) / static_cast<double>(half)) * within + between / static_cast<double>(half);
        const double rhat = std::sqrt(var_plus / within);
        draws.diagnostics.rhat[k] = rhat;
        worst_rhat = std::max(worst_rhat, rhat);
    }
    if (worst_rhat > 1.05) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "split-Rhat %.3f above 1.05; treat results as unconverged", worst_rhat);
        draws.diagnostics.warnings.emplace_back(buf);
    }

    draws.loglik.resize(S, n);
    model.log_density_matrix(data, draws.theta, draws.loglik);
    if (!draws.loglik.allFinite())
        throw DomainError("non_finite_loglik", "log-likelihood matrix has non-finite entries",
                          {{"model", model.name()}});
    return draws;
}

}  // namespace bayeseval
