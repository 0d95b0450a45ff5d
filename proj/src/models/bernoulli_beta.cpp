#include "bayeseval/models/bernoulli_beta.hpp"

#include <cmath>

#include "bayeseval/errors.hpp"
#include "bayeseval/math.hpp"

namespace bayeseval {

namespace {

bool is_one(double x) { return x == 1.0; }

// count of ones; rejects anything that is not exactly 0 or 1
std::size_t count_ones(const DataView& data) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double x = data.row(i)[0];
        if (x == 1.0) {
            ++k;
        } else if (x != 0.0) {
            throw DomainError("bad_observation", "Bernoulli observations must be 0 or 1",
                              {{"index", i}, {"value", x}});
        }
    }
    return k;
}

// log p(x | p) for binary x with stable logs of p = sigmoid(eta)
inline double bernoulli_loglik(double x, double eta) {
    // log sigmoid(eta) = -log1p(exp(-eta)); log(1 - sigmoid(eta)) = -log1p(exp(eta))
    const double log_p = eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
    const double log_q = eta >= 0.0 ? -eta - std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
    return is_one(x) ? log_p : log_q;
}

}  // namespace

BernoulliBetaModel::BernoulliBetaModel(double alpha, double beta0) : alpha_(alpha), beta0_(beta0) {
    if (!(alpha > 0.0) || !(beta0 > 0.0)) {
        throw ConfigError("bad_hyper", "Beta prior requires positive shape parameters",
                          {{"alpha", alpha}, {"beta", beta0}});
    }
    log_norm_ = log_beta(alpha_, beta0_);
}

double BernoulliBetaModel::log_density(std::span<const double> obs, std::span<const double> theta) const {
    const double x = obs[0];
    if (x != 0.0 && x != 1.0) {
        throw DomainError("bad_observation", "Bernoulli observations must be 0 or 1", {{"value", x}});
    }
    return bernoulli_loglik(x, theta[0]);
}

double BernoulliBetaModel::log_prior(std::span<const double> theta) const {
    // Beta(alpha, beta0) density in p, times the Jacobian p(1-p) of eta -> p
    const double eta = theta[0];
    return alpha_ * bernoulli_loglik(1.0, eta) + beta0_ * bernoulli_loglik(0.0, eta) - log_norm_;
}

void BernoulliBetaModel::sample_prior(std::span<double> theta, Rng& rng) const {
    const double p = rng.beta(alpha_, beta0_);
    theta[0] = std::log(p) - std::log1p(-p);
}

void BernoulliBetaModel::grad_log_density(std::span<const double> obs, std::span<const double> theta,
                                          std::span<double> grad) const {
    const double p = 1.0 / (1.0 + std::exp(-theta[0]));
    grad[0] = obs[0] - p;
}

void BernoulliBetaModel::grad_log_prior(std::span<const double> theta, std::span<double> grad) const {
    const double p = 1.0 / (1.0 + std::exp(-theta[0]));
    grad[0] = alpha_ - (alpha_ + beta0_) * p;
}

BernoulliBetaModel::Posterior BernoulliBetaModel::posterior(const DataView& data) const {
    const std::size_t k = count_ones(data);
    return {alpha_ + static_cast<double>(k),
            beta0_ + static_cast<double>(data.size() - k)};
}

double BernoulliBetaModel::log_marginal(const DataView& data) const {
    const Posterior post = posterior(data);
    return log_beta(post.a, post.b) - log_norm_;
}

double BernoulliBetaModel::predictive_one(const DataView& data) const {
    return posterior(data).mean();
}

double BernoulliBetaModel::exact_loo(const DataView& data) const {
    const std::size_t n = data.size();
    if (n < 2) throw DomainError("too_few_observations", "leave-one-out needs n >= 2", {{"n", n}});
    const Posterior post = posterior(data);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool one = is_one(data.row(i)[0]);
        // posterior without observation i
        const double a = post.a - (one ? 1.0 : 0.0);
        const double b = post.b - (one ? 0.0 : 1.0);
        const double pred = one ? a / (a + b) : b / (a + b);
        acc += std::log(pred);
    }
    return -acc / static_cast<double>(n);
}

BernoulliBetaModel::Quadrature BernoulliBetaModel::quadrature(const DataView& data, double beta,
                                                              int grid) const {
    if (grid < 10) throw ConfigError("bad_grid", "quadrature grid too small", {{"grid", grid}});
    const std::size_t n = data.size();
    const std::size_t k = count_ones(data);
    const double kk = static_cast<double>(k);
    const double nn = static_cast<double>(n);

    // tempered posterior density over p on a midpoint grid
    Eigen::VectorXd p(grid), logw(grid);
    for (int g = 0; g < grid; ++g) {
        const double pg = (static_cast<double>(g) + 0.5) / static_cast<double>(grid);
        p[g] = pg;
        logw[g] = (alpha_ - 1.0 + beta * kk) * std::log(pg)
                + (beta0_ - 1.0 + beta * (nn - kk)) * std::log1p(-pg);
    }
    const double lse = log_sum_exp({logw.data(), static_cast<std::size_t>(grid)});
    Eigen::VectorXd w = (logw.array() - lse).exp();

    Quadrature out;
    out.mean_loglik.resize(static_cast<Eigen::Index>(n));
    out.var_loglik.resize(static_cast<Eigen::Index>(n));

    const Eigen::ArrayXd log_p = p.array().log();
    const Eigen::ArrayXd log_q = (1.0 - p.array()).log();

    out.mean_p = (w.array() * p.array()).sum();
    out.var_p = (w.array() * (p.array() - out.mean_p).square()).sum();
    const Eigen::ArrayXd eta = log_p - log_q;
    out.mean_theta = (w.array() * eta).sum();

    // per-datum posterior functionals and the predictives
    double t_acc = 0.0, c_acc = 0.0, vbar = 0.0, mean_ll_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool one = is_one(data.row(i)[0]);
        const Eigen::ArrayXd li = one ? log_p : log_q;
        const double mean = (w.array() * li).sum();
        const double var = (w.array() * (li - mean).square()).sum();
        out.mean_loglik[static_cast<Eigen::Index>(i)] = mean;
        out.var_loglik[static_cast<Eigen::Index>(i)] = var;
        mean_ll_sum += mean;
        vbar += var;
        t_acc += std::log((w.array() * li.exp()).sum());
        c_acc += std::log((w.array() * (-li).exp()).sum());
    }
    out.t_n = -t_acc / nn;
    out.c_n = c_acc / nn;
    out.w_n = out.t_n + vbar / nn;
    out.mean_total_loss = -mean_ll_sum;

    // deviance criterion at the posterior mean of eta
    const double mean_loss = out.mean_total_loss / nn;
    double plug = 0.0;
    for (std::size_t i = 0; i < n; ++i) plug += bernoulli_loglik(data.row(i)[0], out.mean_theta);
    out.dic = 2.0 * mean_loss - (-plug / nn);
    return out;
}

BernoulliTruth::BernoulliTruth(double p) : p_(p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw ConfigError("bad_hyper", "Bernoulli truth requires 0 < p < 1", {{"p", p}});
    }
}

Dataset BernoulliTruth::sample(std::size_t n, Rng& rng) const {
    RowMatrix m(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), 0) = rng.uniform() < p_ ? 1.0 : 0.0;
    return Dataset({1}, std::move(m));
}

double BernoulliTruth::log_density(std::span<const double> obs) const {
    return obs[0] == 1.0 ? std::log(p_) : std::log1p(-p_);
}

double BernoulliTruth::entropy() const {
    return -(p_ * std::log(p_) + (1.0 - p_) * std::log1p(-p_));
}

std::optional<Eigen::VectorXd> BernoulliTruth::realizing_params(const ModelSpec& model) const {
    if (model.name() != "bernoulli_beta") return std::nullopt;
    Eigen::VectorXd theta(1);
    theta[0] = std::log(p_) - std::log1p(-p_);
    return theta;
}

}  // namespace bayeseval
